"""
Reference time stepper for the delay equation, independent of the
closed-form path.

Implicit L1 discretisation of the Caputo derivative based at -h on a
uniform grid aligned with the delay, plus a classical method-of-steps
integrator for the alpha = 1 limit.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import special
from scipy.integrate import solve_ivp

from src.errors import ConfigError, SingularSystemError
from src.problem import Trajectory

logger = logging.getLogger(__name__)

SCHEMES = ("L1-implicit",)


@dataclass(frozen=True)
class OracleConfig:
    step: float = 1e-3
    scheme: str = "L1-implicit"
    richardson: bool = False

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ConfigError(f"oracle step must be a positive number, got {self.step!r}", path="numerics.oracle.step")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown oracle scheme {self.scheme!r}", path="numerics.oracle.scheme")


def l1_weights(alpha, count):
    """b_l = (l+1)^{1-alpha} - l^{1-alpha} for l = 0..count-1 (b_0 = 1 also at alpha = 1)."""
    l = np.arange(count, dtype=float)
    lower = np.where(l > 0, np.power(np.where(l > 0, l, 1.0), 1 - alpha), 0.0)
    return np.power(l + 1, 1 - alpha) - lower


def discrete_caputo(ysamples, alpha, k, step):
    """
    L1 approximation of the Caputo derivative at grid index k.

    Args:
        ysamples: Values y_0..y_K on the uniform grid t_m = -h + m*step;
            rows may be scalars, vectors or matrices.
        alpha (float): Order in (0, 1].
        k (int): Grid index, 1 <= k <= K.
        step (float): Grid spacing.
    """
    ys = np.asarray(ysamples, dtype=float)
    if k < 1 or k >= ys.shape[0]:
        raise IndexError(f"grid index {k} outside 1..{ys.shape[0] - 1}")
    c0 = step ** (-alpha) * special.rgamma(2 - alpha)
    diffs = np.diff(ys[: k + 1], axis=0)
    weights = l1_weights(alpha, k)[::-1]
    return c0 * np.tensordot(weights, diffs, axes=1)


def _grid(spec, step):
    ratio = spec.h / step
    per_delay = round(ratio)
    if abs(ratio - per_delay) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"oracle step {step} does not divide h={spec.h}", path="numerics.oracle.step")
    if per_delay < 16:
        raise ConfigError(f"oracle step {step} is above h/16", path="numerics.oracle.step")
    forward = math.floor(spec.capital_t / step + 1e-9)
    times = (np.arange(per_delay + forward + 1) - per_delay) * step
    times[: per_delay + 1] = np.linspace(-spec.h, 0.0, per_delay + 1)
    return times, per_delay


def _l1_march(spec, step):
    times, per_delay = _grid(spec, step)
    n = spec.n
    count = times.size
    c0 = step ** (-spec.alpha) * special.rgamma(2 - spec.alpha)
    weights = l1_weights(spec.alpha, count)

    lhs = c0 * np.eye(n) - spec.a
    lu, piv = sla.lu_factor(lhs, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * max(1.0, pivots.max()) * n:
        raise SingularSystemError(f"c0*I - A is singular for c0={c0:.6g}")

    y = np.zeros((count, n))
    y[: per_delay + 1] = spec.phi(times[: per_delay + 1])
    forcing = spec.f(times[per_delay + 1:])
    diffs = np.zeros((count, n))
    diffs[:per_delay] = np.diff(y[: per_delay + 1], axis=0)

    for k in range(per_delay + 1, count):
        # Memory of all earlier increments, history included.
        memory = weights[1:k][::-1] @ diffs[: k - 1]
        rhs = c0 * (y[k - 1] - memory) + spec.b @ y[k - per_delay] + forcing[k - per_delay - 1]
        y[k] = sla.lu_solve((lu, piv), rhs)
        diffs[k - 1] = y[k] - y[k - 1]
    return times, y, per_delay


def oracle_solve(spec, cfg=OracleConfig()):
    """
    Solves the problem by the implicit L1 scheme.

    A y(t_k) is taken implicitly and B y(t_k - h) is read from the grid.
    With cfg.richardson the scheme also runs at step/2 and returns
    2 fine - coarse on the coarse grid; history rows stay exact.

    Raises:
        ConfigError: step does not divide h or exceeds h/16.
        SingularSystemError: c0*I - A is singular.
    """
    logger.info(f"Oracle: L1 scheme with step={cfg.step}, richardson={cfg.richardson}")
    times, y, per_delay = _l1_march(spec, cfg.step)
    if cfg.richardson:
        fine_times, fine, _ = _l1_march(spec, cfg.step / 2)
        coarse_count = times.size
        y = y.copy()
        y[per_delay + 1:] = 2 * fine[2 * (per_delay + 1): 2 * coarse_count - 1: 2] - y[per_delay + 1:]
    return Trajectory(times, y, {"step": cfg.step, "scheme": cfg.scheme, "richardson": cfg.richardson})


def method_of_steps_solve(spec, step, rtol=1e-12, atol=1e-14):
    """
    Classical (alpha = 1) solution by the method of steps.

    Each interval [(k-1)h, kh] is integrated with DOP853; the delayed
    term reads the history or the dense output of the previous interval.
    Samples are returned every `step` on [-h, T].
    """
    if spec.alpha != 1:
        raise ConfigError(f"method of steps needs alpha = 1, got {spec.alpha}", path="problem.alpha")
    h = spec.h
    pieces = []

    def delayed(s):
        if s <= 0:
            return spec.phi(s)[0]
        k = min(int(s // h), len(pieces) - 1)
        return pieces[k].sol(s)

    def rhs(t, y):
        return spec.a @ y + spec.b @ delayed(t - h) + spec.f(t)[0]

    y0 = spec.phi(0.0)[0]
    start = 0.0
    while start < spec.capital_t:
        stop = min(start + h, spec.capital_t)
        sol = solve_ivp(rhs, (start, stop), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise ArithmeticError(f"method of steps failed on [{start}, {stop}]: {sol.message}")
        pieces.append(sol)
        y0 = sol.y[:, -1]
        start = stop
        logger.debug(f"Method of steps: interval ending at {stop} done")

    history_times = np.linspace(-h, 0.0, max(2, round(h / step)) + 1)
    forward = np.arange(1, math.floor(spec.capital_t / step + 1e-9) + 1) * step
    values = [spec.phi(history_times)]
    for t in forward:
        k = min(int(t // h), len(pieces) - 1)
        values.append(pieces[k].sol(t)[None, :])
    times = np.concatenate([history_times, forward])
    return Trajectory(times, np.vstack(values), {"step": step, "scheme": "method-of-steps"})
