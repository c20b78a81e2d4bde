"""Run results shared by ALMTON and the baselines."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

Array = np.ndarray
NAN = float("nan")

CONVERGED = "converged"
MAX_ITER = "max_iterations_exceeded"
SIGMA_EXCEEDED = "sigma_exceeded"
SUBSOLVER_ERROR = "subsolver_error"
SDP_FAIL = "sdp_fail"
DIVERGED = "diverged"
LINE_SEARCH_FAIL = "line_search_failed"


@dataclass
class IterRecord:
    """One outer iteration.  Fields a method does not use stay NaN."""

    k: int
    x: Array
    f: float
    grad_norm: float
    success: bool
    sigma: float = NAN           # outer regularization entering the iteration
    sigma_tilde: float = NAN     # phase-closing regularization
    sigma_next: float = NAN
    step_norm: float = 0.0
    rho: float = NAN
    f_trial: float = NAN
    grad_norm_trial: float = NAN
    subsolver_status: str = ""
    inner_count: int = 0
    lambda_bar: float = NAN
    lambda_min_hk: float = NAN
    lambda_min_model_bar: float = NAN
    model_decrease: float = NAN
    identity_decrease: float = NAN
    alpha_lm: float = NAN
    step_size: float = NAN       # line-search length for first/second-order methods

    def as_row(self) -> dict:
        row = asdict(self)
        row["x"] = [float(v) for v in self.x]
        return row


@dataclass
class Counts:
    iterations: int = 0
    successful: int = 0
    unsuccessful_sigma0: int = 0
    unsuccessful_sigmapos: int = 0
    f_evals: int = 0
    derivative_evals: int = 0
    sdp_solves: int = 0


@dataclass
class RunResult:
    solver: str
    status: str
    x: Array
    f: float
    grad_norm: float
    counts: Counts = field(default_factory=Counts)
    ledger: list[IterRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


LEDGER_FIELDS = [f.name for f in fields(IterRecord)]
