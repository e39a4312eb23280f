import os
import sys
import unittest

import numpy as np
from scipy import integrate, special

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.errors import ConfigError
from src.functions import Affine, Constant, Poly, Sin, function_from_dict


class TestShapes(unittest.TestCase):
    def test_scalar_and_array_calls(self):
        fn = Affine(offset=(1.0, 2.0), slope=(0.5, -1.0))
        self.assertEqual(fn(0.3).shape, (2,))
        self.assertEqual(fn(np.array([0.0, 0.5, 1.0])).shape, (3, 2))
        np.testing.assert_allclose(fn(1.0), [1.5, 1.0])


class TestCaputo(unittest.TestCase):
    def test_constant_has_zero_derivative(self):
        fn = Constant(value=(3.0, -1.0))
        np.testing.assert_array_equal(fn.caputo(np.array([0.0, 1.7]), 0.4, 1.0), np.zeros((2, 2)))

    def test_affine(self):
        fn = Affine(offset=(1.0,), slope=(2.0,))
        # D^alpha of 2 (t + h) based at -h is 2 (t + h)^{1-alpha} / Gamma(2 - alpha).
        expected = 2.0 * 1.5 ** 0.5 / special.gamma(1.5)
        self.assertAlmostEqual(fn.caputo(0.5, 0.5, 1.0)[0], expected, places=14)

    def test_poly_square_about_delay_start(self):
        fn = Poly(coefficients=((0.0,), (0.0,), (1.0,)), center=-1.0)
        self.assertAlmostEqual(fn.caputo(0.0, 0.5, 1.0)[0], 1.504505556127350, places=12)

    def test_poly_shifted_is_same_polynomial(self):
        fn = Poly(coefficients=((1.0, 0.0), (-2.0, 1.0), (0.5, 3.0)), center=0.3)
        h = 0.7
        shifted = fn.shifted(h)
        for t in (-0.7, 0.0, 1.1):
            x = t + h
            direct = sum(c * x ** m for m, c in enumerate(shifted))
            np.testing.assert_allclose(direct, fn(t), rtol=1e-13, atol=1e-13)

    def test_poly_matches_quadrature(self):
        fn = Poly(coefficients=((0.2,), (1.0,), (-0.4,), (0.3,)), center=0.5)
        alpha, h, t = 0.35, 1.0, 1.4
        derivative = lambda s: 1.0 - 0.8 * (s - 0.5) + 0.9 * (s - 0.5) ** 2
        numeric, _ = integrate.quad(derivative, -h, t, weight="alg", wvar=(0.0, -alpha))
        self.assertAlmostEqual(fn.caputo(t, alpha, h)[0], numeric / special.gamma(1 - alpha), places=10)

    def test_sin_matches_quadrature(self):
        fn = Sin(offset=(0.0, 1.0), amplitude=(0.5, -0.2), omega=2.0, phase=0.3)
        h = 1.0
        for alpha in (0.2, 0.6, 0.9):
            for t in (-0.5, 0.4, 2.0):
                derivative = lambda s: 2.0 * np.cos(2.0 * s + 0.3)
                numeric, _ = integrate.quad(derivative, -h, t, weight="alg", wvar=(0.0, -alpha))
                wave = numeric / special.gamma(1 - alpha)
                np.testing.assert_allclose(fn.caputo(t, alpha, h), wave * np.array([0.5, -0.2]),
                                           rtol=1e-9, atol=1e-11, err_msg=f"alpha={alpha}, t={t}")

    def test_sin_high_frequency(self):
        alpha, h = 0.5, 1.0
        for omega in (40.0, 80.0):
            fn = Sin(offset=(0.0,), amplitude=(1.0,), omega=omega)
            numeric, _ = integrate.quad(lambda s: omega * np.cos(omega * s), -h, 0.0, weight="alg",
                                        wvar=(0.0, -alpha), limit=500)
            value = fn.caputo(0.0, alpha, h)[0]
            self.assertAlmostEqual(value, numeric / special.gamma(1 - alpha), places=6, msg=f"omega={omega}")
            self.assertLess(abs(value), 10.0)

    def test_sin_series_meets_quadrature(self):
        fn = Sin(offset=(0.0,), amplitude=(1.0,), omega=8.0, phase=0.4)
        for alpha in (0.3, 0.7):
            below, above = fn.caputo(np.array([-1e-9, 1e-9]), alpha, 1.0)[:, 0]
            self.assertAlmostEqual(below, above, places=7, msg=f"alpha={alpha}")

    def test_sin_negative_frequency(self):
        fn = Sin(offset=(0.0,), amplitude=(1.0,), omega=-1.5)
        alpha, h, t = 0.5, 1.0, 1.2
        numeric, _ = integrate.quad(lambda s: -1.5 * np.cos(-1.5 * s), -h, t, weight="alg", wvar=(0.0, -alpha))
        self.assertAlmostEqual(fn.caputo(t, alpha, h)[0], numeric / special.gamma(1 - alpha), places=9)

    def test_sin_classical_derivative(self):
        fn = Sin(offset=(0.0,), amplitude=(1.0,), omega=2.0, phase=0.3)
        times = np.array([-1.0, -0.2, 0.0, 1.3, 2.0])
        np.testing.assert_allclose(fn.caputo(times, 1.0, 1.0)[:, 0], 2.0 * np.cos(2.0 * times + 0.3),
                                   rtol=1e-10, atol=1e-12)

    def test_sin_zero_at_delay_start(self):
        fn = Sin(offset=(0.0,), amplitude=(1.0,), omega=1.0)
        self.assertEqual(fn.caputo(-1.0, 0.5, 1.0)[0], 0.0)


class TestFromDict(unittest.TestCase):
    def test_round_trip(self):
        functions = [
            Constant(value=(1.0, 2.0)),
            Affine(offset=(0.0,), slope=(1.5,)),
            Poly(coefficients=((1.0,), (0.0,), (2.0,)), center=-0.5),
            Sin(offset=(0.0, 0.1), amplitude=(0.5, 0.2), omega=2.0, phase=0.0),
        ]
        for fn in functions:
            self.assertEqual(function_from_dict(fn.to_dict()), fn)

    def test_sin_offset_defaults_to_zero(self):
        fn = function_from_dict({"type": "sin", "amplitude": [1.0, 2.0]})
        self.assertEqual(fn.offset, (0.0, 0.0))

    def test_errors_carry_paths(self):
        with self.assertRaises(ConfigError) as ctx:
            function_from_dict({"type": "exp"}, path="problem.history")
        self.assertEqual(ctx.exception.path, "problem.history.type")

        with self.assertRaises(ConfigError) as ctx:
            function_from_dict({"type": "affine", "offset": [1.0], "slope": ["x"]}, path="problem.forcing")
        self.assertEqual(ctx.exception.path, "problem.forcing.slope")

        with self.assertRaises(ConfigError) as ctx:
            function_from_dict({"type": "affine", "offset": [1.0], "slope": [1.0, 2.0]}, path="problem.forcing")
        self.assertEqual(ctx.exception.path, "problem.forcing")

        with self.assertRaises(ConfigError):
            function_from_dict([1, 2, 3])


if __name__ == '__main__':
    unittest.main()
