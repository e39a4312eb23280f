import json
import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from src.errors import ConfigError, FracDelayError
from src.functions import BuiltinFunction, function_from_dict, zero_function
from src.linalg import SeriesConfig
from src.oracle import OracleConfig
from src.problem import ProblemSpec
from src.quadrature import QuadratureConfig

logger = logging.getLogger(__name__)

CAPUTO_MODES = ("analytic", "numeric")
OUTPUT_MODES = ("w", "x")


def _matrix(value, path):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[value]]
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigError("expected a matrix as a list of rows", path=path)
    rows = []
    for i, row in enumerate(value):
        try:
            entries = tuple(float(x) for x in row)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric entry: {exc}", path=f"{path}[{i}]") from exc
        if not all(math.isfinite(x) for x in entries):
            raise ConfigError("entries must be finite", path=f"{path}[{i}]")
        rows.append(entries)
    if any(len(row) != len(rows) for row in rows):
        raise ConfigError(f"matrix must be square, got {len(rows)} rows of lengths {[len(r) for r in rows]}", path=path)
    return tuple(rows)


def _number(data, key, path, default=None):
    value = data.get(key, default)
    if value is None or isinstance(value, bool):
        raise ConfigError("missing or invalid number", path=f"{path}.{key}")
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {value!r}", path=f"{path}.{key}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"expected a finite number, got {value!r}", path=f"{path}.{key}")
    return out


def _section(data, key, path):
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"expected an object, got {type(value).__name__}", path=f"{path}.{key}" if path else key)
    return value


def _build(cls, data, path):
    """Instantiates a numerics dataclass from a JSON object, rejecting unknown keys."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path=path)
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path=path) from exc


@dataclass(frozen=True)
class ProblemConfig:
    a: tuple
    b: tuple
    h: float
    alpha: float
    horizon: float
    history: BuiltinFunction
    forcing: BuiltinFunction
    history_caputo: str = "analytic"

    @property
    def n(self):
        return len(self.a)

    def to_spec(self):
        """The ProblemSpec this section describes, with the analytic Caputo derivative when requested."""
        caputo = None
        if self.history_caputo == "analytic":
            history, alpha, h = self.history, self.alpha, self.h
            caputo = lambda s: history.caputo(s, alpha, h)
        return ProblemSpec(a=np.array(self.a), b=np.array(self.b), h=self.h, alpha=self.alpha,
                           capital_t=self.horizon, history=self.history, forcing=self.forcing,
                           history_caputo=caputo)


@dataclass(frozen=True)
class NumericsConfig:
    series: SeriesConfig = field(default_factory=SeriesConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    mesh: float = 0.01
    beta: float = 1.0
    workers: int = 1


@dataclass(frozen=True)
class OutputConfig:
    path: str = None
    mode: str = "w"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0


def parse_problem(data):
    path = "problem"
    a = _matrix(data.get("a"), f"{path}.a")
    b = _matrix(data.get("b"), f"{path}.b")
    if len(a) != len(b):
        raise ConfigError(f"A is {len(a)}x{len(a)} but B is {len(b)}x{len(b)}", path=f"{path}.b")
    n = len(a)
    history = function_from_dict(data["history"], f"{path}.history") if "history" in data else zero_function(n)
    forcing = function_from_dict(data["forcing"], f"{path}.forcing") if "forcing" in data else zero_function(n)
    for name, fn in (("history", history), ("forcing", forcing)):
        if fn.n != n:
            raise ConfigError(f"{name} has {fn.n} components but A is {n}x{n}", path=f"{path}.{name}")
    mode = data.get("history_caputo", "analytic")
    if mode not in CAPUTO_MODES:
        raise ConfigError(f"history_caputo must be one of {CAPUTO_MODES}, got {mode!r}", path=f"{path}.history_caputo")
    unknown = sorted(set(data) - {"a", "b", "h", "alpha", "horizon", "history", "forcing", "history_caputo"})
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path=path)
    problem = ProblemConfig(a=a, b=b, h=_number(data, "h", path), alpha=_number(data, "alpha", path),
                            horizon=_number(data, "horizon", path), history=history, forcing=forcing,
                            history_caputo=mode)
    try:
        problem.to_spec()
    except ConfigError:
        raise
    except FracDelayError as exc:
        raise ConfigError(str(exc), path=path) from exc
    return problem


def parse_numerics(data):
    path = "numerics"
    unknown = sorted(set(data) - {f.name for f in fields(NumericsConfig)})
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path=path)
    numerics = NumericsConfig(
        series=_build(SeriesConfig, _section(data, "series", path), f"{path}.series"),
        quadrature=_build(QuadratureConfig, _section(data, "quadrature", path), f"{path}.quadrature"),
        oracle=_build(OracleConfig, _section(data, "oracle", path), f"{path}.oracle"),
        mesh=_number(data, "mesh", path, 0.01),
        beta=_number(data, "beta", path, 1.0),
        workers=int(_number(data, "workers", path, 1)),
    )
    if numerics.mesh <= 0:
        raise ConfigError(f"mesh must be positive, got {numerics.mesh}", path=f"{path}.mesh")
    if numerics.beta <= 0:
        raise ConfigError(f"beta must be positive, got {numerics.beta}", path=f"{path}.beta")
    if numerics.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {numerics.workers}", path=f"{path}.workers")
    return numerics


def parse_config(data):
    """Builds a RunConfig from the decoded JSON document."""
    if not isinstance(data, dict):
        raise ConfigError("the config file must hold a JSON object")
    unknown = sorted(set(data) - {"problem", "numerics", "output", "seed"})
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    if "problem" not in data:
        raise ConfigError("missing section", path="problem")

    output = _section(data, "output", "")
    mode = output.get("mode", "w")
    if mode not in OUTPUT_MODES:
        raise ConfigError(f"mode must be one of {OUTPUT_MODES}, got {mode!r}", path="output.mode")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}", path="seed")

    return RunConfig(problem=parse_problem(_section(data, "problem", "")),
                     numerics=parse_numerics(_section(data, "numerics", "")),
                     output=_build(OutputConfig, output, "output"),
                     seed=seed)


def emit_config(cfg):
    """The JSON document for a RunConfig; parse_config(emit_config(c)) == c."""
    p, nm = cfg.problem, cfg.numerics
    return {
        "problem": {
            "a": [list(row) for row in p.a],
            "b": [list(row) for row in p.b],
            "h": p.h,
            "alpha": p.alpha,
            "horizon": p.horizon,
            "history": p.history.to_dict(),
            "forcing": p.forcing.to_dict(),
            "history_caputo": p.history_caputo,
        },
        "numerics": {
            "series": {"tol": nm.series.tol, "max_terms": nm.series.max_terms},
            "quadrature": {
                "nodes_per_unit": nm.quadrature.nodes_per_unit,
                "scheme": nm.quadrature.scheme,
                "breakpoint_split": nm.quadrature.breakpoint_split,
                "grading": nm.quadrature.grading,
                "numeric_caputo_fallback": nm.quadrature.numeric_caputo_fallback,
            },
            "oracle": {"step": nm.oracle.step, "scheme": nm.oracle.scheme, "richardson": nm.oracle.richardson},
            "mesh": nm.mesh,
            "beta": nm.beta,
            "workers": nm.workers,
        },
        "output": {"path": cfg.output.path, "mode": cfg.output.mode},
        "seed": cfg.seed,
    }


def load_config(path="config.json"):
    """
    Loads and validates a run configuration file.

    Raises:
        ConfigError: unreadable file, JSON syntax error (with line and
            column) or an invalid field (with its path).
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(data)
    logger.info(f"Loaded config {path}: n={cfg.problem.n}, h={cfg.problem.h}, alpha={cfg.problem.alpha}")
    return cfg


def with_overrides(cfg, tol=None, mesh=None, seed=None):
    """Applies the --tol, --mesh and --seed command line overrides."""
    numerics = cfg.numerics
    if tol is not None:
        numerics = replace(numerics, series=replace(numerics.series, tol=tol))
    if mesh is not None:
        if not mesh > 0:
            raise ConfigError(f"mesh must be positive, got {mesh}", path="--mesh")
        numerics = replace(numerics, mesh=mesh)
    if seed is not None:
        if seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {seed}", path="--seed")
        cfg = replace(cfg, seed=seed)
    return replace(cfg, numerics=numerics)
