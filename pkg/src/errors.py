class FracDelayError(Exception):
    """Base class for every error raised by the fracdelay package."""


class ConfigError(FracDelayError, ValueError):
    """
    Raised for unusable run configuration or user-facing parameters.

    Args:
        message (str): Human readable description.
        path (str): Dotted field path inside the config, e.g. 'problem.a[1]'.
        line (int): Line of a JSON syntax error, when known.
        column (int): Column of a JSON syntax error, when known.
    """
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        location = []
        if path:
            location.append(f"field '{path}'")
        if line is not None:
            location.append(f"line {line}, column {column}")
        if location:
            message = f"{message} ({'; '.join(location)})"
        super().__init__(message)


class DimensionError(FracDelayError, ValueError):
    pass


class NonFiniteError(FracDelayError, ValueError):
    pass


class PoleError(FracDelayError, ArithmeticError):
    pass


class GammaOverflowError(FracDelayError, OverflowError):
    pass


class ConvergenceError(FracDelayError, ArithmeticError):
    pass


class SingularityError(FracDelayError, ArithmeticError):
    pass


class CommutativityError(FracDelayError, ValueError):
    pass


class QuadratureError(FracDelayError, ArithmeticError):
    """Kernel evaluation failed inside a convolution integral at time t."""
    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message if t is None else f"{message} (t={t!r})")


class MissingDerivativeError(FracDelayError, ValueError):
    pass


class InsufficientSamplesError(FracDelayError, ValueError):
    pass


class SingularSystemError(FracDelayError, ArithmeticError):
    pass
