import csv
import io
import json
import os
import sys
import tempfile
import unittest
from unittest.mock import MagicMock, patch

import numpy as np
from scipy import special

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, cmd_eval_x, cmd_oracle, cmd_solve, cmd_verify, parse_times
from src.config import load_config
from src.errors import ConfigError, ConvergenceError
from src.verify import CheckResult, SkipCheck, Verifier, format_report

SCALAR = {
    "problem": {
        "a": [[-0.5]], "b": [[0.3]], "h": 1.0, "alpha": 0.6, "horizon": 1.5,
        "history": {"type": "affine", "offset": [1.0], "slope": [0.5]},
        "forcing": {"type": "constant", "value": [0.2]},
    },
    "numerics": {"oracle": {"step": 0.001, "richardson": True}, "mesh": 0.25},
    "seed": 3,
}


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, data, name="config.json"):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        return path

    def variant(self, **problem):
        data = json.loads(json.dumps(SCALAR))
        data["problem"].update(problem)
        return data


class TestEvalX(CliTestCase):
    def test_identity_at_zero_and_zero_before(self):
        data = self.variant(a=[[-0.4, 0.2], [0.0, -0.3]], b=[[0.3, 0.1], [0.0, 0.2]],
                            history={"type": "constant", "value": [0.0, 0.0]},
                            forcing={"type": "constant", "value": [0.0, 0.0]})
        out = io.StringIO()
        self.assertEqual(cmd_eval_x(self.config(data), "0,-0.5", stream=out), EXIT_OK)
        header, rows = read_csv(out.getvalue())
        self.assertEqual(header, ["t", "entry_1_1", "entry_1_2", "entry_2_1", "entry_2_2"])
        np.testing.assert_array_equal(rows[0], [0.0, 1.0, 0.0, 0.0, 1.0])
        np.testing.assert_array_equal(rows[1], [-0.5, 0.0, 0.0, 0.0, 0.0])

    def test_without_delay_coupling(self):
        path = self.config(self.variant(a=[[0.4]], b=[[0.0]]))
        out = io.StringIO()
        self.assertEqual(cmd_eval_x(path, "0.8,2.5", stream=out), EXIT_OK)
        _, rows = read_csv(out.getvalue())
        for t, value in rows:
            expected = sum((0.4 * t ** 0.6) ** k * special.rgamma(0.6 * k + 1) for k in range(120))
            self.assertAlmostEqual(value, expected, places=12)

    def test_output_is_reproducible(self):
        path = self.config(SCALAR)
        first, second = io.StringIO(), io.StringIO()
        cmd_eval_x(path, "0.3,1.7,2.2", stream=first)
        cmd_eval_x(path, "0.3,1.7,2.2", stream=second)
        self.assertEqual(first.getvalue(), second.getvalue())

    def test_bad_times(self):
        with self.assertRaises(ConfigError):
            parse_times("0.1,abc")
        self.assertEqual(parse_times("1, 2.5,"), [1.0, 2.5])
        self.assertEqual(cmd_eval_x(self.config(SCALAR), "", stream=io.StringIO()), EXIT_CONFIG)


class TestSolveAndOracle(CliTestCase):
    def test_zero_data(self):
        path = self.config(self.variant(history={"type": "constant", "value": [0.0]},
                                        forcing={"type": "constant", "value": [0.0]}))
        out = io.StringIO()
        self.assertEqual(cmd_solve(path, stream=out), EXIT_OK)
        header, rows = read_csv(out.getvalue())
        self.assertEqual(header, ["t", "y_1"])
        np.testing.assert_array_equal(rows[:, 1], np.zeros(len(rows)))

    def test_solve_matches_oracle(self):
        path = self.config(SCALAR)
        solved, stepped = io.StringIO(), io.StringIO()
        self.assertEqual(cmd_solve(path, stream=solved), EXIT_OK)
        self.assertEqual(cmd_oracle(path, stream=stepped), EXIT_OK)
        _, solution = read_csv(solved.getvalue())
        _, reference = read_csv(stepped.getvalue())

        history = solution[:, 0] <= 0
        np.testing.assert_allclose(solution[history, 1], 1.0 + 0.5 * solution[history, 0], rtol=1e-15)
        forward = solution[:, 0] > 0
        expected = np.interp(solution[forward, 0], reference[:, 0], reference[:, 1])
        np.testing.assert_allclose(solution[forward, 1], expected, atol=1e-3)

    def test_writes_file_and_refuses_overwrite(self):
        data = json.loads(json.dumps(SCALAR))
        target = os.path.join(self.tmp.name, "solution.csv")
        data["output"] = {"path": target, "mode": "x"}
        path = self.config(data)
        self.assertEqual(cmd_solve(path), EXIT_OK)
        with open(target, "r", encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), "t,y_1")
        self.assertEqual(cmd_solve(path), EXIT_CONFIG)

    def test_mesh_override(self):
        out = io.StringIO()
        self.assertEqual(cmd_solve(self.config(SCALAR), mesh=0.5, stream=out), EXIT_CONFIG)
        self.assertEqual(out.getvalue(), "")


class TestExitCodes(CliTestCase):
    def test_invalid_json(self):
        path = os.path.join(self.tmp.name, "broken.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write('{"problem": [1, 2,')
        self.assertEqual(cmd_solve(path, stream=io.StringIO()), EXIT_CONFIG)

    def test_invalid_field(self):
        path = self.config(self.variant(alpha=0.0))
        self.assertEqual(cmd_oracle(path, stream=io.StringIO()), EXIT_CONFIG)

    @patch('src.cli.ClosedFormSolver')
    def test_math_failure(self, mock_solver):
        mock_solver.return_value.solve.side_effect = ConvergenceError("series did not converge")
        out = io.StringIO()
        self.assertEqual(cmd_solve(self.config(SCALAR), stream=out), EXIT_FAILURE)
        self.assertEqual(out.getvalue(), "")


class TestVerify(CliTestCase):
    @patch('src.cli.run_verification')
    def test_report_and_exit_code(self, mock_run):
        results = [CheckResult("qtable_golden", "pass", 1e-16, 1e-12),
                   CheckResult("commuting_reduction", "skipped", tolerance=1e-9, detail="A and B do not commute")]
        mock_run.return_value = (results, True)
        out = io.StringIO()
        self.assertEqual(cmd_verify(self.config(SCALAR), seed=11, stream=out), EXIT_OK)
        self.assertEqual(out.getvalue(), format_report(results, 11))
        self.assertTrue(out.getvalue().startswith("fracdelay verify seed=11\n"))
        self.assertIn("commuting_reduction | skipped | nan | 1.000e-09", out.getvalue())
        self.assertTrue(out.getvalue().endswith("1/2 passed\n"))
        self.assertEqual(mock_run.call_args.kwargs["strict"], False)

        mock_run.return_value = (results[:1] + [CheckResult("zero_data", "fail", 1.0, 0.0)], False)
        self.assertEqual(cmd_verify(self.config(SCALAR), stream=io.StringIO()), EXIT_FAILURE)

    def test_demo_config_passes_and_repeats(self):
        demo = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'config.json'))
        first, second = io.StringIO(), io.StringIO()
        self.assertEqual(cmd_verify(demo, stream=first), EXIT_OK, msg=first.getvalue())
        self.assertEqual(cmd_verify(demo, stream=second), EXIT_OK)
        self.assertEqual(first.getvalue(), second.getvalue())
        self.assertNotIn("| fail |", first.getvalue())

    def test_skips_follow_strict_flag(self):
        cfg = load_config(self.config(SCALAR))
        skipping = MagicMock(side_effect=SkipCheck("not applicable"))
        self.assertEqual(Verifier(cfg)._run_one("commuting_reduction", skipping, 1e-9).status, "skipped")
        self.assertEqual(Verifier(cfg, strict=True)._run_one("commuting_reduction", skipping, 1e-9).status, "fail")

    def test_non_commuting_demo_skips_commuting_check(self):
        demo = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'config.json'))
        verifier = Verifier(load_config(demo))
        result = verifier._run_one("commuting_reduction", verifier.commuting_reduction, 1e-9)
        self.assertEqual(result.status, "skipped")
        self.assertIn("do not commute", result.detail)

    def test_math_errors_become_failed_rows(self):
        cfg = load_config(self.config(SCALAR))
        result = Verifier(cfg)._run_one("ml_vs_expm", MagicMock(side_effect=ConvergenceError("stuck")), 1e-10)
        self.assertEqual(result.status, "fail")
        self.assertIn("ConvergenceError", result.detail)

    def test_cheap_checks_pass(self):
        cfg = load_config(self.config(SCALAR))
        verifier = Verifier(cfg)
        for name, check, tolerance in verifier.checks():
            if name in ("qtable_golden", "zero_a_reduction", "zero_b_reduction", "commuting_reduction",
                        "ml_vs_expm", "beta_identity"):
                self.assertEqual(verifier._run_one(name, check, tolerance).status, "pass", msg=name)
            if name == "classical_method_of_steps":
                self.assertEqual(verifier._run_one(name, check, tolerance).status, "skipped")

    def test_reduction_sweep_covers_three_delays(self):
        verifier = Verifier(load_config(self.config(SCALAR)))
        times = verifier._times(3 * verifier.h)
        self.assertEqual(times.size, 20)
        self.assertGreater(times[0], 0.0)
        self.assertEqual(times[-1], 3.0)

    def test_classical_limit_passes(self):
        data = self.variant(a=[[-0.4, 0.2], [0.0, -0.3]], b=[[0.3, 0.1], [0.0, 0.2]], alpha=1.0, horizon=2.0,
                            history={"type": "affine", "offset": [1.0, 0.5], "slope": [0.5, -0.25]},
                            forcing={"type": "sin", "offset": [0.0, 0.1], "amplitude": [0.5, 0.2], "omega": 2.0})
        verifier = Verifier(load_config(self.config(data)))
        result = verifier._run_one("classical_method_of_steps", verifier.classical_limit, 1e-5)
        self.assertEqual(result.status, "pass", msg=result.detail)


if __name__ == '__main__':
    unittest.main()
