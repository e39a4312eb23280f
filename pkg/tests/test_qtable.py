import os
import sys
import unittest

import numpy as np

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.errors import CommutativityError, DimensionError
from src.linalg import max_abs
from src.qtable import QTableCache, build_qtable, commutes, qtable_commuting_closed_form


class TestBuildQTable(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(2024)
        self.a = rng.uniform(-1, 1, (2, 2))
        self.b = rng.uniform(-1, 1, (2, 2))
        self.table = build_qtable(self.a, self.b, 6, 6)

    def assertCell(self, i, j, expected):
        self.assertLess(max_abs(self.table.q(i, j) - expected), 1e-12, msg=f"cell ({i}, {j})")

    def test_printed_cells(self):
        a, b = self.a, self.b
        self.assertCell(0, 0, np.eye(2))
        self.assertCell(0, 1, np.zeros((2, 2)))
        self.assertCell(0, 2, np.zeros((2, 2)))
        self.assertCell(1, 0, a)
        self.assertCell(1, 1, b)
        self.assertCell(2, 1, a @ b + b @ a)
        self.assertCell(3, 1, a @ (a @ b + b @ a) + b @ a @ a)
        self.assertCell(3, 2, a @ b @ b + b @ (a @ b + b @ a))

    def test_first_and_last_columns(self):
        for p in range(7):
            self.assertCell(p, 0, np.linalg.matrix_power(self.a, p))
            self.assertCell(p, p, np.linalg.matrix_power(self.b, p))

    def test_upper_triangle_is_zero(self):
        for i in range(7):
            for j in range(i + 1, 7):
                self.assertEqual(max_abs(self.table.cells[i, j]), 0.0)

    def test_zero_b_keeps_only_first_column(self):
        table = build_qtable(self.a, np.zeros((2, 2)), 6, 4)
        for i in range(7):
            self.assertLess(max_abs(table.q(i, 0) - np.linalg.matrix_power(self.a, i)), 1e-12)
            for j in range(1, 5):
                self.assertEqual(max_abs(table.q(i, j)), 0.0)

    def test_zero_a_keeps_only_diagonal(self):
        table = build_qtable(np.zeros((2, 2)), self.b, 5, 5)
        for i in range(6):
            for j in range(6):
                expected = np.linalg.matrix_power(self.b, i) if i == j else np.zeros((2, 2))
                self.assertLess(max_abs(table.q(i, j) - expected), 1e-12)

    def test_norms_match_cells(self):
        np.testing.assert_array_equal(self.table.norms, np.max(np.abs(self.table.cells), axis=(2, 3)))

    def test_lookup_outside_table(self):
        with self.assertRaises(IndexError):
            self.table.q(7, 3)
        self.assertEqual(max_abs(self.table.q(3, -1)), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            build_qtable(np.eye(2), np.eye(3), 3, 1)


class TestCommutingClosedForm(unittest.TestCase):
    def test_examples(self):
        np.testing.assert_array_equal(qtable_commuting_closed_form([[1.5]], [[0.5]], 0, 0), [[1.0]])
        self.assertAlmostEqual(qtable_commuting_closed_form([[2.0]], [[3.0]], 2, 1)[0, 0], 12.0)
        self.assertAlmostEqual(qtable_commuting_closed_form([[0.5]], [[0.25]], 4, 2)[0, 0], 0.09375)

    def test_matches_recursion(self):
        rng = np.random.default_rng(11)
        a = rng.uniform(-0.5, 0.5, (3, 3))
        b = 0.4 * a @ a - 0.3 * a + 0.1 * np.eye(3)
        self.assertTrue(commutes(a, b))
        table = build_qtable(a, b, 8, 8)
        for i in range(9):
            for j in range(i + 1):
                self.assertLess(max_abs(table.q(i, j) - qtable_commuting_closed_form(a, b, i, j)), 1e-10)

    def test_rejects_non_commuting(self):
        with self.assertRaises(CommutativityError):
            qtable_commuting_closed_form([[0, 1], [0, 0]], [[0, 0], [1, 0]], 2, 1)


class TestQTableCache(unittest.TestCase):
    def test_grows_on_demand(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(-1, 1, (2, 2))
        b = rng.uniform(-1, 1, (2, 2))
        cache = QTableCache(a, b, i_max=4, p_max=1)
        small = cache.table(3, 1)
        self.assertIs(cache.table(2, 0), small)

        grown = cache.table(20, 3)
        self.assertGreaterEqual(grown.i_max, 20)
        self.assertEqual(grown.p_max, 3)
        np.testing.assert_allclose(grown.cells[:5, :2], small.cells, rtol=0, atol=1e-15)
        # Earlier tables stay intact.
        self.assertEqual(small.i_max, 4)


if __name__ == '__main__':
    unittest.main()
