import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from src.errors import ConfigError, DimensionError, NonFiniteError
from src.linalg import as_matrix, require_square

logger = logging.getLogger(__name__)


def sample(fn, times, n):
    """
    Evaluates a vector function at many times as an (m, n) array.

    Vectorised callables (the built-ins) are called once; anything else
    falls back to one call per time.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    try:
        values = np.asarray(fn(times), dtype=float)
        if values.shape == (times.size, n):
            return values
    except (TypeError, ValueError):
        pass
    values = np.array([np.asarray(fn(float(t)), dtype=float).reshape(n) for t in times])
    return values.reshape(times.size, n)


@dataclass(frozen=True)
class ProblemSpec:
    """
    One linear delay equation of Caputo type

        D^alpha y(t) = A y(t) + B y(t - h) + f(t),  0 < t <= T,
        y(t) = phi(t) on [-h, 0],

    with the derivative based at -h. alpha = 1 is the classical limit.
    """
    a: np.ndarray
    b: np.ndarray
    h: float
    alpha: float
    capital_t: float
    history: object
    forcing: object
    history_caputo: object = None

    def __post_init__(self):
        a = as_matrix(self.a)
        b = as_matrix(self.b)
        n = require_square(a, "A")
        if require_square(b, "B") != n:
            raise DimensionError(f"A is {a.shape} but B is {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"delay h must be a positive number, got {self.h!r}", path="problem.h")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha!r}", path="problem.alpha")
        if not (self.capital_t > 0 and math.isfinite(self.capital_t)):
            raise ConfigError(f"horizon must be a positive number, got {self.capital_t!r}", path="problem.horizon")

        start = sample(self.history, [-self.h], n)
        if not np.all(np.isfinite(start)):
            raise NonFiniteError("history(-h) is not finite")
        samples = sample(self.forcing, np.linspace(-self.h, self.capital_t, 9), n)
        if not np.all(np.isfinite(samples)):
            raise NonFiniteError("forcing is not finite on [-h, T]")

    @property
    def n(self):
        return self.a.shape[0]

    def phi(self, t):
        return sample(self.history, t, self.n)

    def f(self, t):
        return sample(self.forcing, t, self.n)

    def with_data(self, history=None, forcing=None, history_caputo=None):
        """Same equation with other history and forcing, for superposition checks."""
        return replace(self,
                       history=history if history is not None else self.history,
                       forcing=forcing if forcing is not None else self.forcing,
                       history_caputo=history_caputo)


@dataclass
class Trajectory:
    """Sampled solution: times in [-h, T] and one row of values per time."""
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or self.values.shape[0] != self.times.size:
            raise DimensionError(f"{self.times.size} times but {self.values.shape[0]} value rows")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def n(self):
        return self.values.shape[1]

    def interpolate(self, t):
        """Piecewise linear value at t (scalar -> (n,), array -> (m, n))."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < self.times[0]) or np.any(arr > self.times[-1]):
            raise ValueError(f"t outside [{self.times[0]}, {self.times[-1]}]")
        out = np.stack([np.interp(np.atleast_1d(arr), self.times, self.values[:, k]) for k in range(self.n)], axis=-1)
        return out[0] if arr.ndim == 0 else out

    def window(self, t_min, t_max):
        keep = (self.times >= t_min) & (self.times <= t_max)
        return Trajectory(self.times[keep], self.values[keep], dict(self.meta))
