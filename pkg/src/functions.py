import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from src.errors import ConfigError

logger = logging.getLogger(__name__)

# Taylor terms kept for the Caputo derivative of `sin`.
SIN_TERMS = 400
# Largest |omega| (t + h) for the series; past it the terms cancel.
SIN_SERIES_REACH = 8.0


def _vector(values, path):
    try:
        out = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a list of numbers: {exc}", path=path) from exc
    if not out or not all(math.isfinite(v) for v in out):
        raise ConfigError("expected a non-empty list of finite numbers", path=path)
    return out


def _scalar(value, path):
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {value!r}", path=path) from exc
    if not math.isfinite(out):
        raise ConfigError(f"expected a finite number, got {value!r}", path=path)
    return out


def _times(t):
    """(times as a 1-D array, whether the input was a scalar)."""
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _shape(values, scalar):
    return values[0] if scalar else values


def _power_caputo(x, m, alpha):
    """Caputo derivative of x^m (x = t + h), based at x = 0."""
    if m == 0:
        return np.zeros_like(x)
    return math.gamma(m + 1) * special.rgamma(m + 1 - alpha) * np.power(x, m - alpha)


class BuiltinFunction:
    """
    Vector valued function of time with an analytic Caputo derivative based at -h.

    Calling with a scalar returns shape (n,), with an array of m times
    shape (m, n).
    """
    tag = None

    @property
    def n(self):
        raise NotImplementedError

    def __call__(self, t):
        raise NotImplementedError

    def caputo(self, t, alpha, h):
        raise NotImplementedError

    def to_dict(self):
        data = {"type": self.tag}
        data.update({k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()})
        return data


@dataclass(frozen=True)
class Constant(BuiltinFunction):
    value: tuple
    tag = "constant"

    @property
    def n(self):
        return len(self.value)

    def __call__(self, t):
        times, scalar = _times(t)
        return _shape(np.tile(np.array(self.value), (times.size, 1)), scalar)

    def caputo(self, t, alpha, h):
        times, scalar = _times(t)
        return _shape(np.zeros((times.size, self.n)), scalar)

    @classmethod
    def from_dict(cls, data, path):
        return cls(value=_vector(data.get("value"), f"{path}.value"))


@dataclass(frozen=True)
class Affine(BuiltinFunction):
    offset: tuple
    slope: tuple
    tag = "affine"

    def __post_init__(self):
        if len(self.offset) != len(self.slope):
            raise ConfigError(f"offset has {len(self.offset)} entries but slope has {len(self.slope)}")

    @property
    def n(self):
        return len(self.offset)

    def __call__(self, t):
        times, scalar = _times(t)
        return _shape(np.array(self.offset) + np.outer(times, self.slope), scalar)

    def caputo(self, t, alpha, h):
        times, scalar = _times(t)
        factor = _power_caputo(times + h, 1, alpha)
        return _shape(np.outer(factor, self.slope), scalar)

    @classmethod
    def from_dict(cls, data, path):
        return cls(offset=_vector(data.get("offset"), f"{path}.offset"),
                   slope=_vector(data.get("slope"), f"{path}.slope"))


@dataclass(frozen=True)
class Poly(BuiltinFunction):
    """sum_k coefficients[k] (t - center)^k with vector coefficients."""
    coefficients: tuple
    center: float = 0.0
    tag = "poly"

    def __post_init__(self):
        sizes = {len(c) for c in self.coefficients}
        if len(sizes) != 1:
            raise ConfigError(f"poly coefficients must share one length, got {sorted(sizes)}")

    @property
    def n(self):
        return len(self.coefficients[0])

    def __call__(self, t):
        times, scalar = _times(t)
        x = times - self.center
        out = np.zeros((times.size, self.n))
        for c in reversed(self.coefficients):
            out = out * x[:, None] + np.array(c)
        return _shape(out, scalar)

    def shifted(self, h):
        """Coefficients of the same polynomial in powers of (t + h)."""
        d = -h - self.center
        degree = len(self.coefficients) - 1
        shifted = np.zeros((degree + 1, self.n))
        for k, c in enumerate(self.coefficients):
            for m in range(k + 1):
                shifted[m] += special.comb(k, m, exact=True) * d ** (k - m) * np.array(c)
        return shifted

    def caputo(self, t, alpha, h):
        times, scalar = _times(t)
        x = times + h
        out = np.zeros((times.size, self.n))
        for m, c in enumerate(self.shifted(h)):
            if m:
                out += np.outer(_power_caputo(x, m, alpha), c)
        return _shape(out, scalar)

    def to_dict(self):
        return {"type": self.tag, "coefficients": [list(c) for c in self.coefficients], "center": self.center}

    @classmethod
    def from_dict(cls, data, path):
        raw = data.get("coefficients")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("poly needs a non-empty list of coefficient vectors", path=f"{path}.coefficients")
        coefficients = tuple(_vector(c, f"{path}.coefficients[{k}]") for k, c in enumerate(raw))
        return cls(coefficients=coefficients, center=_scalar(data.get("center", 0.0), f"{path}.center"))


@dataclass(frozen=True)
class Sin(BuiltinFunction):
    offset: tuple
    amplitude: tuple
    omega: float = 1.0
    phase: float = 0.0
    tag = "sin"

    def __post_init__(self):
        if len(self.offset) != len(self.amplitude):
            raise ConfigError(f"offset has {len(self.offset)} entries but amplitude has {len(self.amplitude)}")

    @property
    def n(self):
        return len(self.offset)

    def __call__(self, t):
        times, scalar = _times(t)
        wave = np.sin(self.omega * times + self.phase)
        return _shape(np.array(self.offset) + np.outer(wave, self.amplitude), scalar)

    def _caputo_series(self, x, alpha, h):
        """
        Term-wise power rule on the Taylor series about t = -h:
        sum_{k>=1} omega^k sin(theta + k pi/2) x^{k-alpha} / Gamma(k+1-alpha),
        x = t + h, theta = phase - omega h.
        """
        theta = self.phase - self.omega * h
        k = np.arange(1, SIN_TERMS + 1)
        signs = np.sin(theta + k * np.pi / 2) * np.sign(self.omega) ** k
        inside = x > 0
        with np.errstate(divide="ignore"):
            logs = (k[:, None] * np.log(abs(self.omega))
                    + (k[:, None] - alpha) * np.log(np.where(inside, x, 1.0))[None, :]
                    - special.gammaln(k + 1 - alpha)[:, None])
        terms = np.exp(logs)
        terms[:, ~inside] = 0.0
        if alpha == 1:
            # x^0 = 1 at x = 0 for the k = 1 term.
            terms[0, ~inside] = abs(self.omega)
        return signs @ terms

    def _caputo_quad(self, s, alpha, h):
        """Integral of omega cos(omega r + phase) against (s-r)^{-alpha} over [-h, s]."""
        omega, phase = self.omega, self.phase
        if alpha == 1:
            return omega * math.cos(omega * s + phase)
        limit = max(50, int(4 * abs(omega) * (s + h)))
        value, _ = integrate.quad(lambda r: omega * math.cos(omega * r + phase), -h, s,
                                  weight="alg", wvar=(0.0, -alpha), epsabs=1e-13, epsrel=1e-12, limit=limit)
        return value * special.rgamma(1 - alpha)

    def caputo(self, t, alpha, h):
        """Series for |omega| (t + h) up to SIN_SERIES_REACH, quadrature past it."""
        times, scalar = _times(t)
        x = times + h
        near = abs(self.omega) * x <= SIN_SERIES_REACH
        wave = np.zeros(times.size)
        wave[near] = self._caputo_series(x[near], alpha, h)
        for idx in np.nonzero(~near)[0]:
            wave[idx] = self._caputo_quad(float(times[idx]), alpha, h)
        return _shape(np.outer(wave, self.amplitude), scalar)

    @classmethod
    def from_dict(cls, data, path):
        amplitude = _vector(data.get("amplitude"), f"{path}.amplitude")
        offset = data.get("offset")
        return cls(offset=(0.0,) * len(amplitude) if offset is None else _vector(offset, f"{path}.offset"),
                   amplitude=amplitude,
                   omega=_scalar(data.get("omega", 1.0), f"{path}.omega"),
                   phase=_scalar(data.get("phase", 0.0), f"{path}.phase"))


FUNCTIONS = {cls.tag: cls for cls in (Constant, Affine, Poly, Sin)}


def function_from_dict(data, path="function"):
    """Builds a built-in function from its config object {"type": tag, ...}."""
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object with a 'type' field, got {type(data).__name__}", path=path)
    tag = data.get("type")
    if tag not in FUNCTIONS:
        raise ConfigError(f"unknown function type {tag!r}, expected one of {sorted(FUNCTIONS)}", path=f"{path}.type")
    try:
        return FUNCTIONS[tag].from_dict(data, path)
    except ConfigError as exc:
        if exc.path:
            raise
        raise ConfigError(str(exc), path=path) from exc


def zero_function(n):
    return Constant(value=(0.0,) * n)
