"""Strict local minimizers of cubic polynomials via semidefinite programming.

The cubic ``psi`` with coefficients ``(c, b, Q, H)`` is lifted to

    min   1/2 Tr(Q X) + b^T x + 1/2 y
    s.t.  1/2 Tr(H_i X) + (Q x)_i + b_i = 0,            i = 1..n
          v_i = Tr(H_i X) + (Q x)_i,                     i = 1..n
          [sum_i x_i H_i + Q, v; v^T, y] >= 0,  [X, x; x^T, 1] >= 0

over ``X`` symmetric, ``x``, ``y`` and the auxiliary ``v``.  When ``psi``
has a strict local minimizer the optimal ``x`` is that point.  Interior-point
output is polished with Newton's method on ``grad psi = 0`` and then
certified: a point with vanishing gradient and positive definite Hessian is
the unique strict local minimizer of a cubic, regardless of how it was found.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cubic import CubicPoly

Array = np.ndarray
log = logging.getLogger(__name__)

MINIMIZER_FOUND = "minimizer_found"
NO_LOCAL_MIN = "no_local_min"
SOLVER_FAILURE = "solver_failure"

# relative to max(1, coefficient scale)
KKT_TOL = 1e-10
STRICT_TOL = 1e-6
RANK_TOL = 1e-4


def _triu_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(n) for i in range(j + 1)]


@dataclass(frozen=True)
class PsdBlock:
    """Affine matrix ``const + sum_j z_j coeffs[j]`` constrained to be PSD."""

    const: Array
    coeffs: Array

    @property
    def size(self) -> int:
        return self.const.shape[0]

    def value(self, z: Array) -> Array:
        return self.const + np.tensordot(z, self.coeffs, axes=1)


@dataclass(frozen=True)
class ConicProgram:
    """Linear objective, linear equalities and two PSD blocks over ``z``.

    ``z`` packs the upper triangle of ``X`` (column-major), then ``x``, ``y``
    and ``v``.
    """

    n: int
    objective: Array
    A_eq: Array
    b_eq: Array
    blocks: tuple[PsdBlock, ...]

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_eq(self) -> int:
        return self.A_eq.shape[0]

    def offsets(self) -> tuple[int, int, int]:
        nx = self.n * (self.n + 1) // 2
        return nx, nx + self.n, nx + self.n + 1

    def unpack(self, z: Array):
        """Split ``z`` into ``(X, x, y, v)``."""
        n = self.n
        ox, oy, ov = self.offsets()
        X = np.zeros((n, n))
        for k, (i, j) in enumerate(_triu_pairs(n)):
            X[i, j] = X[j, i] = z[k]
        return X, z[ox:oy].copy(), float(z[oy]), z[ov:ov + n].copy()

    def pack(self, X: Array, x: Array, y: float, v: Array) -> Array:
        vals = [X[i, j] for i, j in _triu_pairs(self.n)]
        return np.concatenate([vals, x, [y], v])


def build_sdp(p: CubicPoly) -> ConicProgram:
    """Encode the strict-local-minimizer search for ``p`` as a conic program."""
    n = p.n
    pairs = _triu_pairs(n)
    nx = len(pairs)
    ox, oy, ov = nx, nx + n, nx + n + 1
    N = ov + n
    m = n + 1
    Q, H, b = np.asarray(p.Q), np.asarray(p.H), np.asarray(p.b)

    # Tr(M X) as a linear form on the packed triangle
    def trace_row(M: Array) -> Array:
        return np.array([M[i, i] if i == j else 2.0 * M[i, j] for i, j in pairs])

    q = np.zeros(N)
    q[:nx] = 0.5 * trace_row(Q)
    q[ox:oy] = b
    q[oy] = 0.5

    A = np.zeros((2 * n, N))
    rhs = np.zeros(2 * n)
    for i in range(n):
        tr = trace_row(H[i])
        A[i, :nx] = 0.5 * tr
        A[i, ox:oy] = Q[i]
        rhs[i] = -b[i]
        A[n + i, :nx] = -tr
        A[n + i, ox:oy] = -Q[i]
        A[n + i, ov + i] = 1.0

    # [sum x_i H_i + Q, v; v^T, y]
    curv_const = np.zeros((m, m))
    curv_const[:n, :n] = Q
    curv = np.zeros((N, m, m))
    for i in range(n):
        curv[ox + i, :n, :n] = H[i]
        curv[ov + i, i, n] = curv[ov + i, n, i] = 1.0
    curv[oy, n, n] = 1.0

    # [X, x; x^T, 1]
    mom_const = np.zeros((m, m))
    mom_const[n, n] = 1.0
    mom = np.zeros((N, m, m))
    for k, (i, j) in enumerate(pairs):
        mom[k, i, j] = mom[k, j, i] = 1.0
    for i in range(n):
        mom[ox + i, i, n] = mom[ox + i, n, i] = 1.0

    return ConicProgram(n, q, A, rhs, (PsdBlock(curv_const, curv), PsdBlock(mom_const, mom)))


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class BackendResult:
    """What a conic backend hands back.

    ``status`` is one of ``optimal``, ``inaccurate``, ``infeasible``,
    ``unbounded`` or ``error``; ``z`` may be present for any status.
    """

    status: str
    z: Array | None
    residual: float = float("nan")
    iterations: int = 0
    raw_status: str = ""


class ClarabelBackend:
    """Interior-point solve through the Clarabel conic solver."""

    name = "clarabel"

    def __init__(self, max_iter: int = 200):
        self.max_iter = max_iter

    @staticmethod
    def _svec_rows(block: PsdBlock):
        m = block.size
        idx = [(i, j) for j in range(m) for i in range(j + 1)]
        w = np.array([1.0 if i == j else np.sqrt(2.0) for i, j in idx])
        rows_i = np.array([i for i, _ in idx])
        rows_j = np.array([j for _, j in idx])
        const = block.const[rows_i, rows_j] * w
        F = block.coeffs[:, rows_i, rows_j].T * w[:, None]
        return const, F

    def solve(self, prog: ConicProgram, tol: float) -> BackendResult:
        import clarabel

        parts_A = [prog.A_eq]
        parts_b = [prog.b_eq]
        cones = [clarabel.ZeroConeT(prog.num_eq)]
        for block in prog.blocks:
            const, F = self._svec_rows(block)
            parts_A.append(-F)
            parts_b.append(const)
            cones.append(clarabel.PSDTriangleConeT(block.size))
        A = sp.csc_matrix(np.vstack(parts_A))
        bvec = np.concatenate(parts_b)
        P = sp.csc_matrix((prog.num_vars, prog.num_vars))

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = self.max_iter
        settings.tol_gap_abs = settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.tol_infeas_abs = settings.tol_infeas_rel = min(tol, 1e-8)
        solver = clarabel.DefaultSolver(P, prog.objective, A, bvec, cones, settings)
        sol = solver.solve()
        raw = str(sol.status).split(".")[-1]
        z = np.asarray(sol.x, dtype=float)
        if raw == "Solved":
            status = "optimal"
        elif raw == "AlmostSolved":
            status = "inaccurate"
        elif "PrimalInfeasible" in raw:
            status = "infeasible"
        elif "DualInfeasible" in raw:
            status = "unbounded"
        else:
            status = "error"
        if not np.all(np.isfinite(z)):
            z = None
        resid = float(np.linalg.norm(prog.A_eq @ z - prog.b_eq)) if z is not None else float("nan")
        return BackendResult(status, z, resid, int(sol.iterations), raw)


class CvxoptBackend:
    """Interior-point solve through ``cvxopt.solvers.sdp``."""

    name = "cvxopt"

    def solve(self, prog: ConicProgram, tol: float) -> BackendResult:
        from cvxopt import matrix, solvers

        Gs, hs = [], []
        for block in prog.blocks:
            m = block.size
            # column-major vec of each coefficient matrix
            G = -block.coeffs.transpose(0, 2, 1).reshape(prog.num_vars, m * m).T
            Gs.append(matrix(np.ascontiguousarray(G)))
            hs.append(matrix(np.ascontiguousarray(block.const)))
        opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": min(tol, 1e-7),
                "maxiters": 100}
        try:
            res = solvers.sdp(matrix(prog.objective), Gs=Gs, hs=hs,
                              A=matrix(prog.A_eq), b=matrix(prog.b_eq), options=opts)
        except (ValueError, ArithmeticError) as exc:
            return BackendResult("error", None, raw_status=str(exc))
        raw = res["status"]
        z = None if res["x"] is None else np.array(res["x"]).ravel()
        status = {"optimal": "optimal", "primal infeasible": "infeasible",
                  "dual infeasible": "unbounded"}.get(raw, "inaccurate" if z is not None else "error")
        resid = float(np.linalg.norm(prog.A_eq @ z - prog.b_eq)) if z is not None else float("nan")
        return BackendResult(status, z, resid, int(res.get("iterations", 0)), raw)


class FallbackBackend:
    """Try backends in order until one returns a usable status."""

    name = "fallback"

    def __init__(self, backends):
        self.backends = list(backends)

    def solve(self, prog: ConicProgram, tol: float) -> BackendResult:
        result = BackendResult("error", None)
        for backend in self.backends:
            try:
                result = backend.solve(prog, tol)
            except Exception as exc:  # noqa: BLE001 - any backend fault moves on to the next one
                log.warning("backend %s raised %s", getattr(backend, "name", backend), exc)
                result = BackendResult("error", None, raw_status=repr(exc))
                continue
            if result.status != "error":
                return result
        return result


BACKENDS = {
    "clarabel": ClarabelBackend,
    "cvxopt": CvxoptBackend,
}


def make_backend(name: str = "clarabel"):
    """Build a backend by name; ``"auto"`` chains Clarabel then CVXOPT."""
    if name == "auto":
        return FallbackBackend([ClarabelBackend(), CvxoptBackend()])
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown SDP backend {name!r}; choose from {sorted(BACKENDS)} or 'auto'")


# ---------------------------------------------------------------------------
# extraction and certification


@dataclass(frozen=True)
class SdpOutcome:
    status: str
    xbar: Array | None
    kkt_grad_norm: float
    kkt_min_eig: float
    rank_gap: float
    backend_status: str = ""
    info: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.status == MINIMIZER_FOUND


def _term_scale(p: CubicPoly, x: Array) -> float:
    """Magnitude of the individual terms of ``grad psi(x)``."""
    return max(1.0, float(np.max(np.abs(p.b))), float(np.max(np.abs(p.Q @ x))),
               float(np.max(np.abs(0.5 * np.einsum("ijk,j,k->i", p.H, x, x)))))


def polish(p: CubicPoly, x0, maxiter: int = 20) -> Array:
    """Newton iterations on ``grad psi = 0`` starting from ``x0``.

    Returns the refined point when its gradient norm is below
    ``1e-10 * max(1, term scale)``; otherwise (divergence, singular Hessian,
    no convergence) ``x0`` is returned unchanged.
    """
    x0 = np.asarray(x0, dtype=float)
    x = x0.copy()
    g = p.grad(x)
    if not np.any(g):
        return x0
    for _ in range(maxiter):
        try:
            d = np.linalg.solve(p.hessian(x), g)
        except np.linalg.LinAlgError:
            return x0
        if not np.all(np.isfinite(d)):
            return x0
        x = x - d
        g = p.grad(x)
        if not np.any(g) or np.linalg.norm(d) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
    if np.all(np.isfinite(x)) and np.linalg.norm(g) <= KKT_TOL * _term_scale(p, x):
        return x
    return x0


def _certify(p: CubicPoly, x: Array) -> tuple[float, float]:
    return float(np.linalg.norm(p.grad(x))), float(np.linalg.eigvalsh(p.hessian(x))[0])


def solve_cubic(p: CubicPoly, tol: float = 1e-6, backend=None) -> SdpOutcome:
    """Find the strict local minimizer of ``p`` or report that none exists."""
    if not (1e-9 <= tol <= 1e-2):
        raise ValueError(f"tol must lie in [1e-9, 1e-2], got {tol}")
    if not p.is_finite():
        raise ValueError("cubic has non-finite coefficients")
    backend = backend if backend is not None else ClarabelBackend()
    prog = build_sdp(p)
    try:
        res = backend.solve(prog, tol)
    except Exception as exc:  # noqa: BLE001 - backend faults become an outcome
        log.warning("SDP backend raised %s", exc)
        return SdpOutcome(SOLVER_FAILURE, None, np.inf, -np.inf, np.nan, repr(exc))

    if res.status in ("infeasible", "unbounded") or res.z is None:
        status = SOLVER_FAILURE if res.status == "error" else NO_LOCAL_MIN
        return SdpOutcome(status, None, np.inf, -np.inf, np.nan, res.raw_status)

    X, x, _, _ = prog.unpack(res.z)
    moment = np.block([[X, x[:, None]], [x[None, :], np.ones((1, 1))]])
    ev = np.sort(np.abs(np.linalg.eigvalsh(moment)))[::-1]
    rank_gap = float(ev[1] / ev[0]) if ev.size > 1 and ev[0] > 0 else 0.0

    xbar = polish(p, x)
    gnorm, lmin = _certify(p, xbar)
    scale = max(1.0, p.scale())
    info = {"rank1": rank_gap <= RANK_TOL, "backend_iterations": res.iterations,
            "eq_residual": res.residual}
    if gnorm <= KKT_TOL * _term_scale(p, xbar) and lmin >= STRICT_TOL * scale:
        return SdpOutcome(MINIMIZER_FOUND, xbar, gnorm, lmin, rank_gap, res.raw_status, info)
    status = SOLVER_FAILURE if res.status == "error" else NO_LOCAL_MIN
    return SdpOutcome(status, None, gnorm, lmin, rank_gap, res.raw_status, info)
