import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from src.errors import CommutativityError, ConfigError, ConvergenceError
from src.linalg import (
    SeriesConfig,
    as_matrix,
    identity,
    matexp,
    max_abs,
    power_or_raise,
    require_square,
    zeros,
)
from src.qtable import QTableCache, commutator_defect, commutes

logger = logging.getLogger(__name__)

# Series indices summed per vectorised block.
BLOCK = 16


@dataclass(frozen=True)
class DelayGrid:
    """The delay h and the interval index p with (p-1)h < t <= ph."""
    h: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"delay h must be a positive number, got {self.h!r}", path="problem.h")

    def p_of(self, t):
        if t <= 0:
            return 0
        p = math.ceil(t / self.h)
        # Repair float rounding so that (p-1)h < t <= ph holds exactly.
        while p > 1 and (p - 1) * self.h >= t:
            p -= 1
        while p * self.h < t:
            p += 1
        return p

    def is_breakpoint(self, t, rel=1e-12):
        k = round(t / self.h)
        return abs(t - k * self.h) <= rel * max(1.0, abs(t))

    def breakpoints(self, lo, hi):
        """Multiples jh strictly inside (lo, hi)."""
        first = math.floor(lo / self.h) + 1
        last = math.ceil(hi / self.h) - 1
        return [k * self.h for k in range(first, last + 1) if lo < k * self.h < hi]


def _check_orders(alpha, beta):
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha!r}", path="problem.alpha")
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta!r}", path="numerics.beta")


def delayed_ml_E(b, h, alpha, beta, t, cfg=SeriesConfig()):
    """
    Delayed Mittag-Leffler matrix function E^B_{h,alpha,beta}(t).

    Theta for t <= -h, I (h+t)^{beta-1}/Gamma(beta) on (-h, 0], and on
    ((k-1)h, kh] the finite sum over m = 0..k of
    B^m (t-(m-1)h)^{m alpha + beta - 1} / Gamma(m alpha + beta).
    """
    b = as_matrix(b)
    n = require_square(b, "B")
    _check_orders(alpha, beta)
    grid = DelayGrid(h)
    if t <= -h:
        return zeros(n)
    if t <= 0:
        return as_matrix(np.eye(n) * power_or_raise(h + t, beta - 1) * special.rgamma(beta))

    k = grid.p_of(t)
    if k + 1 > cfg.max_terms:
        raise ConvergenceError(f"E^B at t={t} needs {k + 1} terms, above max_terms={cfg.max_terms}")
    total = np.zeros((n, n))
    power = np.eye(n)
    for m in range(k + 1):
        exponent = m * alpha + beta - 1
        total += power * power_or_raise(t - (m - 1) * h, exponent) * special.rgamma(m * alpha + beta)
        power = power @ b
    return as_matrix(total)


def delayed_exponential(b, h, t):
    """Delayed matrix exponential e_h^{Bt}, the alpha = beta = 1 case of E^B."""
    return delayed_ml_E(b, h, 1.0, 1.0, t)


class DelayedPerturbation:
    """
    Evaluator for the delayed perturbation X^{A,B}_{h,alpha,beta}(t).

    X is Theta on [-h, 0), I at t = 0, and for (p-1)h < t <= ph

        sum_{i>=0} sum_{j=0}^{p-1} Q_{i+1}(jh) (t-jh)^{i alpha+beta-1} / Gamma(i alpha+beta).

    The i-series is cut at the first i >= max(1, p-1) whose largest j-term
    is below cfg.tol. Rows of Q are fetched from a shared QTableCache that
    grows on demand, so one cache can serve kernels with different beta.
    """
    def __init__(self, a, b, h, alpha, beta, cfg=SeriesConfig(), tables=None):
        self.tables = tables if tables is not None else QTableCache(a, b)
        self.a = self.tables.a
        self.b = self.tables.b
        self.n = self.tables.n
        _check_orders(alpha, beta)
        self.grid = DelayGrid(h)
        self.h = float(h)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.cfg = cfg

    def __call__(self, t):
        return self._evaluate(t, order=0.0, select=None)

    def split(self, t, exponent_cut):
        """X(t) as (terms with exponent i alpha + beta - 1 < cut, remaining terms)."""
        if t <= 0:
            return self(t), zeros(self.n)
        low = self._evaluate(t, order=0.0, select=lambda g: g < exponent_cut)
        high = self._evaluate(t, order=0.0, select=lambda g: g >= exponent_cut)
        return low, high

    def power_rule_derivative(self, t, order, exponent_cut):
        """
        Term-wise fractional derivative of the low-exponent part of X.

        Each (t-jh)^g / Gamma(g+1) with g < exponent_cut maps to
        (t-jh)^{g-order} / Gamma(g+1-order), which vanishes when
        g + 1 - order is a nonpositive integer.
        """
        if t <= 0:
            return zeros(self.n)
        return self._evaluate(t, order=float(order), select=lambda g: g < exponent_cut)

    def _evaluate(self, t, order, select):
        if t < 0:
            return zeros(self.n)
        if t == 0:
            return identity(self.n)

        p = self.grid.p_of(t)
        shifts = t - self.h * np.arange(p)
        js = np.nonzero(shifts > 0)[0]
        u = shifts[js]
        start = max(1, p - 1)
        total = np.zeros((self.n, self.n))

        for i0 in range(0, self.cfg.max_terms, BLOCK):
            rows = np.arange(i0, min(i0 + BLOCK, self.cfg.max_terms))
            table = self.tables.table(int(rows[-1]), p - 1)
            exponents = rows * self.alpha + self.beta - 1
            coeff = np.power(u[None, :], (exponents - order)[:, None]) * special.rgamma(exponents + 1 - order)[:, None]
            sizes = np.abs(coeff) * table.norms[np.ix_(rows, js)]
            if select is not None:
                coeff = coeff * np.array([select(g) for g in exponents], dtype=float)[:, None]
            cells = table.cells[np.ix_(rows, js)]
            per_row = np.einsum("ij,ijab->iab", coeff, cells)

            largest = sizes.max(axis=1)
            done = np.nonzero((rows >= start) & (largest < self.cfg.tol))[0]
            if done.size:
                last = done[0]
                total += per_row[: last + 1].sum(axis=0)
                logger.debug(f"X series at t={t} stopped after {rows[last] + 1} terms")
                return as_matrix(total)
            total += per_row.sum(axis=0)

        raise ConvergenceError(f"delayed perturbation series at t={t} did not reach tol={self.cfg.tol} "
                               f"in {self.cfg.max_terms} terms")


def delayed_perturbation_X(a, b, h, alpha, beta, t, cfg=SeriesConfig(), qt=None):
    """
    X^{A,B}_{h,alpha,beta}(t) for a single t.

    Args:
        qt (QTableCache): Optional shared table cache built from (a, b);
            a private one is created when omitted.
    """
    if qt is None:
        qt = QTableCache(a, b, p_max=max(1, DelayGrid(h).p_of(t)))
    return DelayedPerturbation(a, b, h, alpha, beta, cfg, tables=qt)(t)


def reduction_check_commuting(a, b, h, t, cfg=SeriesConfig(), tol=1e-12):
    """
    Both sides of the alpha = beta = 1 commuting reduction
    X_{h,1,1}(t) = e^{At} e_h^{B1 (t-h)}, B1 = e^{-Ah} B.

    Returns:
        tuple: (lhs, rhs); the caller decides how close they must be.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if not commutes(a, b, tol):
        raise CommutativityError(f"AB != BA (defect {commutator_defect(a, b):.3e})")
    if not t > 0:
        raise ValueError(f"reduction check needs t > 0, got {t!r}")
    lhs = delayed_perturbation_X(a, b, h, 1.0, 1.0, t, cfg)
    b1 = matexp(a, -h) @ b
    rhs = as_matrix(matexp(a, t) @ delayed_ml_E(b1, h, 1.0, 1.0, t - h, cfg))
    logger.debug(f"Commuting reduction at t={t}: defect {max_abs(lhs - rhs):.3e}")
    return lhs, rhs
