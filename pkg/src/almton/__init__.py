"""ALMTON: an adaptive Levenberg-Marquardt third-order Newton method.

Cubic Taylor models are minimized through a semidefinite program; the
package also ships comparator optimizers, test problems, bound audits and a
benchmark harness.
"""
from .baselines import BaselineConfig
from .cubic import CubicPoly, RegularizedModel, alpha_lm, from_bundle, regularize
from .diagnostics import TheoryBounds, audit_run, estimate_bounds
from .problems import Problem, get_problem, rosenbrock
from .results import CONVERGED, Counts, IterRecord, RunResult
from .sdp import SdpOutcome, solve_cubic
from .solver import AlmtonConfig, acceptance_ratio, run, sigma_update
from .tensors import DerivativeBundle, fd_check

__all__ = [
    "AlmtonConfig", "BaselineConfig", "CONVERGED", "Counts", "CubicPoly", "DerivativeBundle",
    "IterRecord", "Problem", "RegularizedModel", "RunResult", "SdpOutcome", "TheoryBounds",
    "acceptance_ratio", "alpha_lm", "audit_run", "estimate_bounds", "fd_check",
    "from_bundle", "get_problem", "regularize", "rosenbrock", "run", "sigma_update",
    "solve_cubic",
]
