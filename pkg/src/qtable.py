import logging
import threading
from dataclasses import dataclass

import numpy as np
from scipy import special

from src.errors import CommutativityError, DimensionError
from src.linalg import as_matrix, max_abs, require_square

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QTable:
    """
    The matrices Q_{i+1}(jh), 0 <= i <= i_max, 0 <= j <= p_max.

    The delay h never enters: s = jh is carried by the integer j.
    `cells[i, j]` is Q_{i+1}(jh) and `norms[i, j]` its max-abs norm.
    """
    n: int
    i_max: int
    p_max: int
    cells: np.ndarray
    norms: np.ndarray

    def q(self, i, j):
        """Q_{i+1}(jh); Theta for j < 0 and for j > i."""
        if j < 0 or j > i:
            return as_matrix(np.zeros((self.n, self.n)))
        if i > self.i_max or j > self.p_max:
            raise IndexError(f"Q_{i + 1}({j}h) is outside this table (i_max={self.i_max}, p_max={self.p_max})")
        return as_matrix(self.cells[i, j])

    def covers(self, i_max, p_max):
        return i_max <= self.i_max and p_max <= self.p_max


def _check_pair(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    n = require_square(a, "A")
    if require_square(b, "B") != n:
        raise DimensionError(f"A is {a.shape} but B is {b.shape}")
    return a, b, n


def build_qtable(a, b, i_max, p_max):
    """
    Runs Q_{k+1}(s) = A Q_k(s) + B Q_k(s - h) with Q_1(0) = I,
    Q_k(-h) = Theta and Q_0 = Theta.

    Args:
        a: System matrix A.
        b: Delay matrix B.
        i_max (int): Largest series index i (rows 0..i_max).
        p_max (int): Largest delay-step index j (columns 0..p_max).

    Returns:
        QTable: Immutable table of all cells.
    """
    a, b, n = _check_pair(a, b)
    if i_max < 1 or p_max < 0:
        raise ValueError(f"need i_max >= 1 and p_max >= 0, got i_max={i_max}, p_max={p_max}")
    if i_max < p_max:
        logger.warning(f"QTable with i_max={i_max} < p_max={p_max}: columns beyond i_max stay Theta")

    cells = np.zeros((i_max + 1, p_max + 1, n, n))
    cells[0, 0] = np.eye(n)
    for i in range(i_max):
        # A acts on every column, B shifts column j-1 into column j.
        cells[i + 1] = a @ cells[i]
        if p_max > 0:
            cells[i + 1, 1:] += b @ cells[i, :-1]

    norms = np.max(np.abs(cells), axis=(2, 3))
    cells.setflags(write=False)
    norms.setflags(write=False)
    logger.debug(f"Built QTable n={n}, i_max={i_max}, p_max={p_max}")
    return QTable(n=n, i_max=i_max, p_max=p_max, cells=cells, norms=norms)


def commutator_defect(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return max_abs(a @ b - b @ a)


def commutes(a, b, tol=1e-12):
    """AB == BA to `tol`, relative to the size of the products."""
    scale = max(1.0, max_abs(a) * max_abs(b))
    return commutator_defect(a, b) <= tol * scale


def qtable_commuting_closed_form(a, b, i, j, tol=1e-12):
    """
    Closed form Q_{i+1}(jh) = C(i, j) A^{i-j} B^j, valid only when AB = BA.

    Raises:
        CommutativityError: A and B do not commute to `tol`.
    """
    a, b, n = _check_pair(a, b)
    if not commutes(a, b, tol):
        raise CommutativityError(f"AB != BA (defect {commutator_defect(a, b):.3e})")
    if i < 0 or j < 0:
        raise ValueError(f"indices must be nonnegative, got i={i}, j={j}")
    if j > i:
        return as_matrix(np.zeros((n, n)))
    coeff = special.comb(i, j, exact=True)
    return as_matrix(coeff * np.linalg.matrix_power(a, i - j) @ np.linalg.matrix_power(b, j))


class QTableCache:
    """
    Hands out QTables for one (A, B) pair, rebuilding with a doubled i_max
    whenever a caller needs more rows or more delay columns.

    Tables are never mutated once built, so a reference obtained from
    `table()` stays valid while other threads trigger growth.
    """
    def __init__(self, a, b, i_max=32, p_max=4):
        self.a, self.b, self.n = _check_pair(a, b)
        self._lock = threading.Lock()
        self._table = build_qtable(self.a, self.b, max(1, i_max), max(0, p_max))

    def table(self, i_needed=0, p_needed=0):
        current = self._table
        if current.covers(i_needed, p_needed):
            return current
        with self._lock:
            current = self._table
            if current.covers(i_needed, p_needed):
                return current
            i_max = current.i_max
            while i_max < i_needed:
                i_max *= 2
            p_max = max(current.p_max, p_needed)
            logger.debug(f"Growing QTable to i_max={i_max}, p_max={p_max}")
            self._table = build_qtable(self.a, self.b, i_max, p_max)
            return self._table
