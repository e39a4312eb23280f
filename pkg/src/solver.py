import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from src.delayed import BLOCK, DelayedPerturbation, DelayGrid
from src.errors import ConfigError, ConvergenceError, InsufficientSamplesError, MissingDerivativeError, QuadratureError
from src.linalg import SeriesConfig, max_abs
from src.problem import Trajectory, sample
from src.qtable import QTableCache
from src.quadrature import QuadratureConfig, panel_nodes, power_weights

logger = logging.getLogger(__name__)

# Output times on a multiple of h move left by NUDGE * mesh.
NUDGE = 1e-6


def caputo_of_history_numeric(phi, alpha, s, mesh, h):
    """
    L1 approximation of the Caputo derivative of phi at s, based at -h.

    The interval [-h, s] is split into ceil((s+h)/mesh) equal steps.
    First order accurate for twice differentiable phi.

    Raises:
        InsufficientSamplesError: s <= -h leaves no samples to difference.
    """
    if s <= -h:
        raise InsufficientSamplesError(f"need s > -h to sample the history, got s={s}")
    steps = max(1, math.ceil((s + h) / mesh - 1e-9))
    tau = (s + h) / steps
    grid = -h + tau * np.arange(steps + 1)
    grid[-1] = s
    n = np.atleast_1d(np.asarray(phi(-h), dtype=float)).size
    ys = sample(phi, grid, n)

    l = np.arange(steps, dtype=float)
    b = np.power(l + 1, 1 - alpha) - np.where(l > 0, np.power(np.where(l > 0, l, 1.0), 1 - alpha), 0.0)
    return tau ** (-alpha) * special.rgamma(2 - alpha) * (b[::-1] @ np.diff(ys, axis=0))


class ClosedFormSolver:
    """
    Explicit solution of the delay equation through the delayed perturbation kernels.

    y(t) = X_{alpha,1}(t+h) phi(-h)
           + int_{-h}^0 X_{alpha,alpha}(t-s) [D^alpha phi(s) - A phi(s)] ds
           + int_0^t X_{alpha,alpha}(t-s) f(s) ds

    Both kernels share one QTableCache. Each convolution is split per delay
    index j, so the j-th piece carries the weakly singular factor
    (t-jh-s)^{i alpha+alpha-1} that product integration absorbs exactly.
    """
    def __init__(self, spec, quad=QuadratureConfig(), cfg=SeriesConfig()):
        self.spec = spec
        self.quad = quad
        self.cfg = cfg
        self.grid = DelayGrid(spec.h)
        self.tables = QTableCache(spec.a, spec.b, p_max=self.grid.p_of(spec.capital_t + spec.h))
        self.kernel = DelayedPerturbation(spec.a, spec.b, spec.h, spec.alpha, spec.alpha, cfg, tables=self.tables)
        self.anchor_kernel = DelayedPerturbation(spec.a, spec.b, spec.h, spec.alpha, 1.0, cfg, tables=self.tables)
        self._forced_base = {}
        self._history_base = None

    # Integrands

    def _history_caputo(self, s):
        spec = self.spec
        if spec.history_caputo is not None:
            return sample(spec.history_caputo, s, spec.n)
        if not self.quad.numeric_caputo_fallback:
            raise MissingDerivativeError("history has no analytic Caputo derivative and the numeric fallback is off")
        mesh = 1.0 / (4 * self.quad.nodes_per_unit)
        rows = [np.zeros(spec.n) if x <= -spec.h
                else caputo_of_history_numeric(spec.history, spec.alpha, x, mesh, spec.h) for x in s]
        return np.array(rows).reshape(len(s), spec.n)

    def _history_integrand(self, s):
        return self._history_caputo(s) - self.spec.phi(s) @ self.spec.a.T

    def _history_nodes(self):
        if self._history_base is None:
            nodes = panel_nodes(-self.spec.h, 0.0, self.quad.nodes_per_unit, self.quad.grading)
            if self.spec.history_caputo is None and self.quad.numeric_caputo_fallback:
                logger.warning("No analytic Caputo derivative for the history: using the L1 fallback")
            self._history_base = (nodes, self._history_integrand(nodes))
        return self._history_base

    def _forced_nodes(self, lower):
        if lower not in self._forced_base:
            nodes = panel_nodes(lower, self.spec.capital_t, self.quad.nodes_per_unit)
            self._forced_base[lower] = (nodes, self.spec.f(nodes))
        return self._forced_base[lower]

    @staticmethod
    def _insert(nodes, values, points, fn):
        """Adds kernel breakpoints to a cached node set."""
        extra = np.setdiff1d(points, nodes)
        if extra.size == 0:
            return nodes, values
        merged = np.concatenate([nodes, extra])
        order = np.argsort(merged, kind="stable")
        return merged[order], np.vstack([values, fn(extra)])[order]

    # Convolution with X_{alpha,alpha}

    def _convolve(self, t, lo, nodes, values):
        """int_lo^{nodes[-1]} X_{alpha,alpha}(t-s) v(s) ds for v sampled at nodes."""
        spec, cfg = self.spec, self.cfg
        p = self.grid.p_of(t - lo)
        pieces = []
        for j in range(p):
            c = t - j * spec.h
            if c > lo:
                m = np.searchsorted(nodes, c, side="right")
                pieces.append((j, c, nodes[:m], values[:m], c - lo))
        start = max(1, p - 1)
        total = np.zeros(spec.n)

        for i0 in range(0, cfg.max_terms, BLOCK):
            rows = np.arange(i0, min(i0 + BLOCK, cfg.max_terms))
            table = self.tables.table(int(rows[-1]), p - 1)
            gammas = rows * spec.alpha + spec.alpha - 1
            bound = np.zeros(rows.size)
            for j, _, _, _, length in pieces:
                mass = np.exp((gammas + 1) * math.log(length) - special.gammaln(gammas + 2))
                bound = np.maximum(bound, table.norms[rows, j] * mass)
            done = np.nonzero((rows >= start) & (bound < cfg.tol))[0]
            keep = rows if done.size == 0 else rows[: done[0] + 1]

            for j, c, sub_nodes, sub_values, _ in pieces:
                moments = power_weights(sub_nodes, c, gammas[: keep.size]) @ sub_values
                total += np.einsum("gab,gb->a", table.cells[keep, j], moments)
            if done.size:
                logger.debug(f"Convolution at t={t}: {keep[-1] + 1} series terms, {len(pieces)} delay pieces")
                return total
        raise ConvergenceError(f"kernel series at t={t} did not reach tol={cfg.tol} in {cfg.max_terms} terms")

    def _breakpoints(self, t, lo, hi):
        """Nodes s in (lo, hi) where t - s is a multiple of h."""
        return np.array([t - shift for shift in self.grid.breakpoints(t - hi, t - lo)], dtype=float)

    # Public operations

    def forced_response(self, t, lower=0.0):
        """
        int_lower^t X_{alpha,alpha}(t-s) f(s) ds.

        Args:
            t (float): Time in (0, T].
            lower (float): 0 for the zero-history response, -h for the
                equation switched on at -h with zero state.
        """
        spec = self.spec
        if not t > 0:
            raise ValueError(f"forced response needs t > 0, got {t!r}")
        if t > spec.capital_t * (1 + 1e-12):
            raise ValueError(f"t={t} is beyond the horizon T={spec.capital_t}")
        if not -spec.h <= lower <= 0:
            raise ConfigError(f"lower limit must lie in [-h, 0], got {lower!r}", path="lower")
        lower = float(lower)
        base_nodes, base_values = self._forced_nodes(lower)
        inside = base_nodes < t
        points = np.append(self._breakpoints(t, lower, t), t)
        nodes, values = self._insert(base_nodes[inside], base_values[inside], points, spec.f)
        try:
            return self._convolve(t, lower, nodes, values)
        except ArithmeticError as exc:
            logger.error(f"Forced response failed at t={t}: {exc}")
            raise QuadratureError(f"kernel evaluation failed: {exc}", t=t) from exc

    def history_response(self, t):
        """X_{alpha,1}(t+h) phi(-h) + int_{-h}^0 X_{alpha,alpha}(t-s) [D^alpha phi(s) - A phi(s)] ds."""
        spec = self.spec
        if not t > 0:
            raise ValueError(f"history response needs t > 0, got {t!r}")
        anchor = self.anchor_kernel(t + spec.h) @ spec.phi(-spec.h)[0]
        base_nodes, base_values = self._history_nodes()
        points = self._breakpoints(t, -spec.h, 0.0)
        nodes, values = self._insert(base_nodes, base_values, points, self._history_integrand)
        try:
            return anchor + self._convolve(t, -spec.h, nodes, values)
        except ArithmeticError as exc:
            logger.error(f"History response failed at t={t}: {exc}")
            raise QuadratureError(f"kernel evaluation failed: {exc}", t=t) from exc

    def value(self, t):
        return self.history_response(t) + self.forced_response(t)

    def output_times(self, mesh):
        """(requested times, evaluated times) on (0, T]; multiples of h are nudged left."""
        spec = self.spec
        count = math.floor(spec.capital_t / mesh + 1e-9)
        times = np.arange(1, count + 1) * mesh
        if times.size == 0 or times[-1] < spec.capital_t * (1 - 1e-12):
            times = np.append(times, spec.capital_t)
        evaluated = np.array([t - NUDGE * mesh if self.grid.is_breakpoint(t) else t for t in times])
        return times, evaluated

    def solve(self, mesh, workers=None):
        """
        Samples y on [-h, T]: exact history on a uniform grid over [-h, 0]
        and the explicit solution every `mesh` on (0, T].

        Args:
            mesh (float): Output spacing, at most h/4.
            workers (int): Threads evaluating output times; None runs serially.
        """
        spec = self.spec
        if not (mesh > 0 and mesh <= spec.h / 4 * (1 + 1e-12)):
            raise ConfigError(f"mesh must lie in (0, h/4], got {mesh!r}", path="numerics.mesh")

        history_times = np.linspace(-spec.h, 0.0, max(1, math.ceil(spec.h / mesh - 1e-9)) + 1)
        _, evaluated = self.output_times(mesh)
        logger.info(f"Solving on {evaluated.size} output times (mesh={mesh}, workers={workers or 1})")

        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                rows = list(executor.map(self.value, evaluated))
        else:
            rows = [self.value(t) for t in evaluated]

        times = np.concatenate([history_times, evaluated])
        values = np.vstack([spec.phi(history_times), np.array(rows).reshape(len(rows), spec.n)])
        meta = {
            "mesh": mesh,
            "scheme": self.quad.scheme,
            "nodes_per_unit": self.quad.nodes_per_unit,
            "series_tol": self.cfg.tol,
        }
        logger.info(f"Solve finished, max |y| = {max_abs(values):.3e}")
        return Trajectory(times, values, meta)


def forced_response(spec, t, quad=QuadratureConfig(), cfg=SeriesConfig(), lower=0.0):
    """
    int_lower^t X_{alpha,alpha}(t-s) f(s) ds.

    The default lower = 0 is the forcing term of the explicit solution,
    where f acts from t = 0 on. Pass lower = -spec.h for the integral
    from the start of the history interval.
    """
    return ClosedFormSolver(spec, quad, cfg).forced_response(t, lower)


def history_response(spec, t, quad=QuadratureConfig(), cfg=SeriesConfig()):
    return ClosedFormSolver(spec, quad, cfg).history_response(t)


def solve(spec, mesh, quad=QuadratureConfig(), cfg=SeriesConfig(), workers=None):
    return ClosedFormSolver(spec, quad, cfg).solve(mesh, workers)
