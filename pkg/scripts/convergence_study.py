import os
import sys

import numpy as np
from dotenv import load_dotenv

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.config import load_config
from src.oracle import OracleConfig, oracle_solve
from src.quadrature import QuadratureConfig
from src.solver import ClosedFormSolver

load_dotenv()
config_path = os.getenv("FRACDELAY_CONFIG", "config.json")
cfg = load_config(config_path)
spec = cfg.problem.to_spec()
checkpoints = np.linspace(spec.capital_t / 4, spec.capital_t, 5)

print(f"Config: {config_path} (n={spec.n}, h={spec.h}, alpha={spec.alpha}, T={spec.capital_t})")

print("\nClosed form: nodes per unit vs. max difference to 512 nodes per unit")
reference = ClosedFormSolver(spec, QuadratureConfig(nodes_per_unit=512), cfg.numerics.series)
exact = np.array([reference.value(t) for t in checkpoints])
previous = None
for npu in (8, 16, 32, 64, 128):
    solver = ClosedFormSolver(spec, QuadratureConfig(nodes_per_unit=npu), cfg.numerics.series)
    error = np.max(np.abs(np.array([solver.value(t) for t in checkpoints]) - exact))
    ratio = "" if previous is None else f"  ratio {previous / error:.2f}"
    print(f"  {npu:4d}  {error:.3e}{ratio}")
    previous = error

print("\nL1 oracle: step vs. max difference to the closed form")
previous = None
for count in (32, 64, 128, 256, 512):
    try:
        run = oracle_solve(spec, OracleConfig(step=spec.h / count))
    except Exception as e:
        print(f"  h/{count}: {e}")
        continue
    error = np.max(np.abs(run.interpolate(checkpoints) - exact))
    ratio = "" if previous is None else f"  ratio {previous / error:.2f}"
    print(f"  h/{count:<4d} {error:.3e}{ratio}")
    previous = error
