import csv
import functools
import logging
import sys

import numpy as np

from src.config import load_config, with_overrides
from src.delayed import DelayedPerturbation
from src.errors import ConfigError, FracDelayError
from src.oracle import oracle_solve
from src.solver import ClosedFormSolver
from src.verify import format_report, run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def exit_codes(command):
    """Maps the error hierarchy onto exit codes: 2 for config errors, 1 for math failures."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as exc:
            logger.error(f"Configuration error: {exc}")
            return EXIT_CONFIG
        except (FracDelayError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            logger.error(f"{command.__name__} failed: {type(exc).__name__}: {exc}")
            return EXIT_FAILURE
    return wrapper


def parse_times(text):
    try:
        times = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse times {text!r}: {exc}", path="--times") from exc
    if not times:
        raise ConfigError("no times given", path="--times")
    return times


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(header, rows, path=None, mode="w", stream=None):
    """
    Writes a header and numeric rows with 17 significant digits.

    Goes to `path` when given (mode "x" refuses to overwrite), else to
    `stream` or stdout.
    """
    if path:
        try:
            with open(path, mode, newline="", encoding="utf-8") as f:
                _write_rows(f, header, rows)
        except FileExistsError as exc:
            raise ConfigError(f"output file {path} exists and mode is 'x'", path="output.path") from exc
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}", path="output.path") from exc
        logger.info(f"Wrote {len(rows)} rows to {path}")
    else:
        _write_rows(stream or sys.stdout, header, rows)


def _write_rows(f, header, rows):
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])


def _trajectory_rows(trajectory):
    return [[t, *y] for t, y in zip(trajectory.times, trajectory.values)]


def _load(config_path, tol=None, mesh=None, seed=None):
    return with_overrides(load_config(config_path), tol=tol, mesh=mesh, seed=seed)


@exit_codes
def cmd_eval_x(config_path, times, out=None, tol=None, stream=None):
    """CSV of X_{h,alpha,beta}(t) entries at each requested t (beta from numerics.beta)."""
    cfg = _load(config_path, tol=tol)
    p = cfg.problem
    kernel = DelayedPerturbation(np.array(p.a), np.array(p.b), p.h, p.alpha, cfg.numerics.beta, cfg.numerics.series)
    n = p.n
    header = ["t"] + [f"entry_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    rows = []
    for t in parse_times(times):
        try:
            value = kernel(t)
        except (FracDelayError, ArithmeticError) as exc:
            raise type(exc)(f"{exc} (while evaluating X at t={t!r})") from exc
        rows.append([t, *value.ravel()])
    write_csv(header, rows, out or cfg.output.path, cfg.output.mode, stream)
    return EXIT_OK


@exit_codes
def cmd_solve(config_path, out=None, tol=None, mesh=None, stream=None):
    """CSV trajectory of the explicit solution on [-h, T]."""
    cfg = _load(config_path, tol=tol, mesh=mesh)
    spec = cfg.problem.to_spec()
    solver = ClosedFormSolver(spec, cfg.numerics.quadrature, cfg.numerics.series)
    trajectory = solver.solve(cfg.numerics.mesh, workers=cfg.numerics.workers)
    header = ["t"] + [f"y_{k + 1}" for k in range(spec.n)]
    write_csv(header, _trajectory_rows(trajectory), out or cfg.output.path, cfg.output.mode, stream)
    return EXIT_OK


@exit_codes
def cmd_oracle(config_path, out=None, stream=None):
    """CSV trajectory from the L1 time stepper."""
    cfg = _load(config_path)
    spec = cfg.problem.to_spec()
    trajectory = oracle_solve(spec, cfg.numerics.oracle)
    header = ["t"] + [f"y_{k + 1}" for k in range(spec.n)]
    write_csv(header, _trajectory_rows(trajectory), out or cfg.output.path, cfg.output.mode, stream)
    return EXIT_OK


@exit_codes
def cmd_verify(config_path, strict=False, tol=None, mesh=None, seed=None, stream=None):
    """Runs the verification suite; exit code 0 iff every check passes."""
    cfg = _load(config_path, tol=tol, mesh=mesh, seed=seed)
    results, ok = run_verification(cfg, strict=strict)
    (stream or sys.stdout).write(format_report(results, cfg.seed))
    if not ok:
        failed = [r.name for r in results if r.status == "fail"]
        logger.error(f"Verification failed: {', '.join(failed)}")
    return EXIT_OK if ok else EXIT_FAILURE
