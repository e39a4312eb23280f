import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import special

from src.errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    GammaOverflowError,
    NonFiniteError,
    PoleError,
    SingularityError,
)

logger = logging.getLogger(__name__)

# Largest x with a finite float64 Gamma(x).
GAMMA_OVERFLOW = 171.6243769563027


@dataclass(frozen=True)
class SeriesConfig:
    """
    Controls truncation of every infinite sum in the package.

    A series is cut at the first index whose term has max-abs-entry norm
    below `tol`, once at least two terms have been summed. Reaching
    `max_terms` first is a ConvergenceError.
    """
    tol: float = 1e-14
    max_terms: int = 500

    def __post_init__(self):
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError(f"series tol must be a positive number, got {self.tol!r}", path="numerics.series.tol")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ConfigError(f"series max_terms must be a positive integer, got {self.max_terms!r}",
                              path="numerics.series.max_terms")


def as_matrix(x):
    """
    Converts nested lists, arrays or a scalar into a read-only float64 matrix.

    Scalars become 1x1 matrices. Anything that is not two dimensional,
    or that holds NaN/Inf, is rejected.
    """
    m = np.array(x, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix entries must be finite")
    m.setflags(write=False)
    return m


def identity(n):
    return as_matrix(np.eye(n))


def zeros(n):
    return as_matrix(np.zeros((n, n)))


def max_abs(m):
    """Max-absolute-entry norm, the cutoff norm used everywhere."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def require_square(m, name="matrix"):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m.shape[0]


def gamma(x):
    """
    Gamma function for real arguments.

    Raises:
        PoleError: x is 0, -1, -2, ...
        GammaOverflowError: Gamma(x) does not fit in a float64.
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"gamma has a pole at {x!r}")
    if x > GAMMA_OVERFLOW:
        raise GammaOverflowError(f"gamma({x!r}) overflows float64")
    return float(special.gamma(x))


def mat_mul(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return as_matrix(a @ b)


def matexp(a, t=1.0):
    """e^{A t} by Pade scaling-and-squaring."""
    a = as_matrix(a)
    require_square(a, "A")
    return as_matrix(sla.expm(a * float(t)))


def ml_matrix(a, alpha, beta, t, cfg=SeriesConfig()):
    """
    Two-parameter Mittag-Leffler matrix function E_{alpha,beta}(A t^alpha).

    Forward accumulation of sum_k A^k t^{alpha k} / Gamma(k alpha + beta),
    without the t^{beta-1} prefactor.

    Args:
        a: Square matrix A.
        alpha (float): Order, in (0, 1].
        beta (float): Second parameter, > 0.
        t (float): Time, >= 0.
        cfg (SeriesConfig): Truncation settings.

    Returns:
        np.ndarray: The truncated series value.
    """
    a = as_matrix(a)
    n = require_square(a, "A")
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha!r}", path="alpha")
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta!r}", path="beta")
    if t < 0:
        raise ValueError(f"ml_matrix needs t >= 0, got {t!r}")

    step = a * float(t) ** alpha
    power = np.eye(n)
    total = power * special.rgamma(beta)
    for k in range(1, cfg.max_terms + 1):
        power = power @ step
        term = power * special.rgamma(k * alpha + beta)
        total = total + term
        if max_abs(term) < cfg.tol:
            logger.debug(f"ml_matrix converged after {k + 1} terms (alpha={alpha}, beta={beta}, t={t})")
            return as_matrix(total)
    raise ConvergenceError(f"Mittag-Leffler series did not reach tol={cfg.tol} in {cfg.max_terms} terms")


def ml_phi(a, alpha, beta, z, cfg=SeriesConfig()):
    """z^{beta-1} E_{alpha,beta}(A z^alpha), the full matrix function of the ML family."""
    a = as_matrix(a)
    n = require_square(a, "A")
    if z < 0:
        raise ValueError(f"ml_phi needs z >= 0, got {z!r}")
    if z == 0:
        if beta == 1:
            return identity(n)
        if beta > 1:
            return zeros(n)
        raise SingularityError(f"z^(beta-1) is singular at z=0 for beta={beta!r}")
    return as_matrix(z ** (beta - 1) * ml_matrix(a, alpha, beta, z, cfg))


def power_or_raise(base, exponent):
    """base**exponent for base >= 0, refusing 0 to a negative power."""
    if base == 0 and exponent < 0:
        raise SingularityError(f"0 raised to negative power {exponent!r}")
    return base ** exponent
