"""Comparator optimizers sharing the ``Problem``/``RunResult`` interfaces.

``cubic_regularized_newton`` is a plain adaptive cubic regularization method
(quadratic model plus ``sigma/3 ||s||^3``), used as a simple stand-in for
interpolation-based ARp variants.  ``lbfgs`` is the textbook two-loop
recursion with a Wolfe line search.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.optimize import line_search as wolfe_line_search
from scipy.optimize._linesearch import LineSearchWarning

from . import sdp
from .cubic import from_bundle
from .problems import Problem
from .results import (CONVERGED, DIVERGED, LINE_SEARCH_FAIL, MAX_ITER, SDP_FAIL,
                      SUBSOLVER_ERROR, Counts, IterRecord, RunResult)
from .tensors import min_eigenvalue

Array = np.ndarray
DIVERGE_NORM = 1e100


@dataclass
class BaselineConfig:
    method: str = ""
    epsilon: float = 1e-8
    max_iter: int = 100
    alpha: float = 0.01              # gradient descent step
    armijo_c: float = 1e-4
    contraction: float = 0.5
    max_backtracks: int = 50
    cg_forcing: float = 0.5          # CG stops at min(cg_forcing, sqrt||g||) ||g||
    cg_max_iter: int | None = None   # defaults to 2n
    sigma0: float = 1.0              # cubic regularization
    sigma_min: float = 1e-8
    arc_eta1: float = 0.1
    arc_eta2: float = 0.9
    arc_gamma: float = 2.0
    memory: int = 10                 # L-BFGS pairs
    backend: str = "clarabel"
    sdp_tol_loose: float = 1e-3
    sdp_tol_tight: float = 1e-6
    sdp_tol_switch: float = 1e-3

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.epsilon <= 0 or self.max_iter < 0 or self.max_backtracks < 1:
            raise ValueError("epsilon, max_iter and max_backtracks must be positive")
        if self.sigma0 <= 0 or self.arc_gamma <= 1 or self.memory < 1:
            raise ValueError("invalid cubic-regularization or memory settings")


class _Tracker:
    """Counts, ledger and timing shared by every baseline loop."""

    def __init__(self, name: str):
        self.name = name
        self.counts = Counts()
        self.ledger: list[IterRecord] = []
        self.t0 = time.perf_counter()

    def evaluate(self, problem: Problem, x, order: int):
        self.counts.f_evals += 1
        self.counts.derivative_evals += 1
        with np.errstate(over="ignore", invalid="ignore"):
            return problem.evaluate(x, order)

    def value(self, problem: Problem, x) -> float:
        self.counts.f_evals += 1
        with np.errstate(over="ignore", invalid="ignore"):
            return problem.value(x)

    def record(self, rec: IterRecord):
        self.ledger.append(rec)
        if rec.success:
            self.counts.successful += 1

    def finish(self, status: str, x, f, g) -> RunResult:
        self.counts.iterations = len(self.ledger)
        return RunResult(self.name, status, np.array(x, dtype=float), float(f),
                         float(np.linalg.norm(g)), self.counts, self.ledger,
                         time.perf_counter() - self.t0)


def _finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def armijo(phi, f0: float, slope: float, cfg: BaselineConfig, t0: float = 1.0):
    """Backtrack from ``t0``; returns ``(t, f(t))`` or ``(None, None)``."""
    t = t0
    for _ in range(cfg.max_backtracks):
        ft = phi(t)
        if np.isfinite(ft) and ft <= f0 + cfg.armijo_c * t * slope:
            return t, ft
        t *= cfg.contraction
    return None, None


def gradient_descent(problem: Problem, x0, cfg: BaselineConfig | None = None) -> RunResult:
    cfg = cfg or BaselineConfig(method="gd")
    tr = _Tracker(f"gd-{cfg.alpha:g}")
    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 1)
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(b.g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, b.x, b.f, b.g)
        if k == cfg.max_iter:
            break
        x = b.x - cfg.alpha * b.g
        if not _finite(x) or np.linalg.norm(x) > DIVERGE_NORM:
            return tr.finish(DIVERGED, b.x, b.f, b.g)
        tr.record(IterRecord(k, np.array(b.x), b.f, gn, True, step_size=cfg.alpha,
                             step_norm=cfg.alpha * gn))
        b = tr.evaluate(problem, x, 1)
        if not _finite(b.f, b.g):
            return tr.finish(DIVERGED, b.x, b.f, b.g)
    return tr.finish(MAX_ITER, b.x, b.f, b.g)


def newton_direction(H: Array, g: Array) -> tuple[Array, float]:
    """Newton direction, shifting ``H`` by ``lam I`` when it is not positive definite."""
    try:
        L = np.linalg.cholesky(H)
        d = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        if _finite(d) and g @ d < 0:
            return d, 0.0
    except np.linalg.LinAlgError:
        pass
    lmin = min_eigenvalue(H)
    scale = max(1.0, float(np.max(np.abs(H))))
    lam = max(0.0, -lmin) + 1e-6 * scale
    d = -np.linalg.solve(H + lam * np.eye(len(g)), g)
    return d, lam


def damped_newton(problem: Problem, x0, cfg: BaselineConfig | None = None) -> RunResult:
    cfg = cfg or BaselineConfig(method="damped-newton")
    tr = _Tracker("damped-newton")
    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 2)
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(b.g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, b.x, b.f, b.g)
        if k == cfg.max_iter:
            break
        if not _finite(b.H):
            return tr.finish(DIVERGED, b.x, b.f, b.g)
        d, lam = newton_direction(b.H, b.g)
        t, _ = armijo(lambda t: tr.value(problem, b.x + t * d), b.f, float(b.g @ d), cfg)
        if t is None:
            return tr.finish(LINE_SEARCH_FAIL, b.x, b.f, b.g)
        tr.record(IterRecord(k, np.array(b.x), b.f, gn, True, sigma=lam, step_size=t,
                             step_norm=t * float(np.linalg.norm(d)),
                             lambda_min_hk=min_eigenvalue(b.H)))
        b = tr.evaluate(problem, b.x + t * d, 2)
    return tr.finish(MAX_ITER, b.x, b.f, b.g)


def truncated_cg(H: Array, g: Array, tol: float, max_iter: int) -> tuple[Array, str]:
    """Approximately solve ``H d = -g``; stops early on nonpositive curvature.

    Returns ``(d, reason)``.  Meeting negative curvature on the first pass
    gives ``-g``, otherwise the current iterate.
    """
    z = np.zeros_like(g)
    r = g.copy()
    p = -r
    rr = float(r @ r)
    for j in range(max_iter):
        Hp = H @ p
        curv = float(p @ Hp)
        if curv <= 1e-14 * float(p @ p):
            return (-g.copy() if j == 0 else z), "negative_curvature"
        a = rr / curv
        z = z + a * p
        r = r + a * Hp
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= tol:
            return z, "converged"
        p = -r + (rr_new / rr) * p
        rr = rr_new
    return z, "max_iter"


def newton_cg(problem: Problem, x0, cfg: BaselineConfig | None = None) -> RunResult:
    cfg = cfg or BaselineConfig(method="newton-cg")
    tr = _Tracker("newton-cg")
    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 2)
    max_cg = cfg.cg_max_iter or 2 * b.n
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(b.g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, b.x, b.f, b.g)
        if k == cfg.max_iter:
            break
        if not _finite(b.H):
            return tr.finish(DIVERGED, b.x, b.f, b.g)
        d, reason = truncated_cg(b.H, np.array(b.g), min(cfg.cg_forcing, np.sqrt(gn)) * gn,
                                 max_cg)
        slope = float(b.g @ d)
        if slope >= 0:
            d, slope = -np.array(b.g), -gn * gn
        t, _ = armijo(lambda t: tr.value(problem, b.x + t * d), b.f, slope, cfg)
        if t is None:
            return tr.finish(LINE_SEARCH_FAIL, b.x, b.f, b.g)
        tr.record(IterRecord(k, np.array(b.x), b.f, gn, True, step_size=t,
                             step_norm=t * float(np.linalg.norm(d)), subsolver_status=reason))
        b = tr.evaluate(problem, b.x + t * d, 2)
    return tr.finish(MAX_ITER, b.x, b.f, b.g)


def unregularized_third_order(problem: Problem, x0, cfg: BaselineConfig | None = None,
                              backend=None) -> RunResult:
    """Jump to the strict local minimizer of the cubic Taylor model every iteration."""
    cfg = cfg or BaselineConfig(method="unreg-3rd")
    backend = backend if backend is not None else sdp.make_backend(cfg.backend)
    tr = _Tracker("unreg-3rd")
    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 3)
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(b.g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, b.x, b.f, b.g)
        if k == cfg.max_iter:
            break
        tol = cfg.sdp_tol_loose if gn > cfg.sdp_tol_switch else cfg.sdp_tol_tight
        try:
            out = sdp.solve_cubic(from_bundle(b), tol, backend)
        except ValueError:
            return tr.finish(SUBSOLVER_ERROR, b.x, b.f, b.g)
        tr.counts.sdp_solves += 1
        if not out.found:
            tr.record(IterRecord(k, np.array(b.x), b.f, gn, False,
                                 subsolver_status=out.status))
            return tr.finish(SDP_FAIL, b.x, b.f, b.g)
        tr.record(IterRecord(k, np.array(b.x), b.f, gn, True, subsolver_status=out.status,
                             step_norm=float(np.linalg.norm(out.xbar)),
                             lambda_min_hk=min_eigenvalue(b.H)))
        b = tr.evaluate(problem, b.x + out.xbar, 3)
        if not _finite(b.f, b.g, b.H, b.T):
            return tr.finish(DIVERGED, b.x, b.f, b.g)
    return tr.finish(MAX_ITER, b.x, b.f, b.g)


def cubic_step(g: Array, H: Array, sigma: float) -> Array:
    """Global minimizer of ``g.s + 1/2 s.H.s + sigma/3 ||s||^3``.

    Solves ``(H + sigma r I) s = -g`` with ``r = ||s||`` in the eigenbasis of
    ``H``; the hard case adds a multiple of the leftmost eigenvector.
    """
    lam, V = np.linalg.eigh(H)
    gh = V.T @ g
    r_lo = max(0.0, -lam[0] / sigma)
    gscale = max(1.0, float(np.linalg.norm(g)))

    def s_of(r):
        return -gh / (lam + sigma * r)

    def phi(r):
        return float(np.linalg.norm(s_of(r))) - r

    if not np.any(gh):
        if lam[0] >= 0:
            return np.zeros_like(g)
    # below r_lo the shifted matrix is indefinite; check the hard case
    hard = np.abs(lam + sigma * r_lo) <= 1e-12 * max(1.0, abs(lam[0]))
    if r_lo > 0 and np.all(np.abs(gh[hard]) <= 1e-12 * gscale):
        sh = np.zeros_like(gh)
        sh[~hard] = -gh[~hard] / (lam[~hard] + sigma * r_lo)
        rest = r_lo ** 2 - float(sh @ sh)
        if rest >= 0:
            sh[np.argmax(hard)] = np.sqrt(rest)
            return V @ sh
    lo = r_lo * (1.0 + 1e-12) + 1e-15
    if not phi(lo) > 0:
        return V @ s_of(lo)
    hi = r_lo + max(1.0, np.sqrt(np.linalg.norm(g) / sigma))
    while phi(hi) > 0:
        hi = r_lo + 2.0 * (hi - r_lo)
    r = brentq(phi, lo, hi, xtol=1e-14, rtol=1e-12, maxiter=500)
    return V @ s_of(r)


def cubic_regularized_newton(problem: Problem, x0, cfg: BaselineConfig | None = None) -> RunResult:
    """Adaptive cubic regularization of Newton's method (second-order model)."""
    cfg = cfg or BaselineConfig(method="arc2")
    tr = _Tracker("arc2")
    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 2)
    sigma = cfg.sigma0
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(b.g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, b.x, b.f, b.g)
        if k == cfg.max_iter:
            break
        if not _finite(b.H):
            return tr.finish(DIVERGED, b.x, b.f, b.g)
        s = cubic_step(np.array(b.g), np.array(b.H), sigma)
        sn = float(np.linalg.norm(s))
        pred = -(b.g @ s + 0.5 * s @ b.H @ s + sigma / 3.0 * sn ** 3)
        f_trial = tr.value(problem, b.x + s)
        rho = (b.f - f_trial) / pred if pred > 0 else -np.inf
        ok = bool(np.isfinite(f_trial) and rho >= cfg.arc_eta1)
        rec = IterRecord(k, np.array(b.x), b.f, gn, ok, sigma=sigma, rho=rho, f_trial=f_trial,
                         step_norm=sn, model_decrease=pred)
        if ok:
            if rho >= cfg.arc_eta2:
                sigma = max(sigma / cfg.arc_gamma, cfg.sigma_min)
            b = tr.evaluate(problem, b.x + s, 2)
            tr.counts.f_evals -= 1  # value already counted at the trial point
        else:
            sigma *= cfg.arc_gamma
        rec.sigma_next = sigma
        tr.record(rec)
    return tr.finish(MAX_ITER, b.x, b.f, b.g)


def two_loop(g: Array, pairs: list[tuple[Array, Array]]) -> Array:
    """L-BFGS product ``H_k g`` from the stored ``(s, y)`` pairs."""
    q = g.copy()
    alphas = []
    for s, y in reversed(pairs):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), a in zip(pairs, reversed(alphas)):
        q += s * (a - (y @ q) / (y @ s))
    return q


def lbfgs(problem: Problem, x0, cfg: BaselineConfig | None = None) -> RunResult:
    cfg = cfg or BaselineConfig(method="lbfgs")
    tr = _Tracker("lbfgs")

    def fun(x):
        return tr.value(problem, x)

    def grad(x):
        tr.counts.derivative_evals += 1
        with np.errstate(over="ignore", invalid="ignore"):
            return np.array(problem.evaluate(x, 1).g)

    b = tr.evaluate(problem, np.asarray(x0, dtype=float), 1)
    x, f, g = np.array(b.x), b.f, np.array(b.g)
    pairs: list[tuple[Array, Array]] = []
    for k in range(cfg.max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn <= cfg.epsilon:
            return tr.finish(CONVERGED, x, f, g)
        if k == cfg.max_iter:
            break
        d = -two_loop(g, pairs)
        if g @ d >= 0:
            pairs.clear()
            d = -g
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LineSearchWarning)
            t, _, _, f_new, _, g_new = wolfe_line_search(fun, grad, x, d, g, f, c1=cfg.armijo_c,
                                                         c2=0.9, maxiter=cfg.max_backtracks)
        if t is None:
            # restart from steepest descent with plain backtracking
            pairs.clear()
            d = -g
            t, f_new = armijo(lambda t: fun(x + t * d), f, -gn * gn, cfg,
                              t0=min(1.0, 1.0 / gn))
            if t is None:
                return tr.finish(LINE_SEARCH_FAIL, x, f, g)
            g_new = None
        x_new = x + t * d
        if g_new is None:
            g_new = grad(x_new)
        g_new = np.asarray(g_new, dtype=float)
        s, y = x_new - x, g_new - g
        if s @ y > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y))
            if len(pairs) > cfg.memory:
                pairs.pop(0)
        tr.record(IterRecord(k, x.copy(), f, gn, True, step_size=t,
                             step_norm=float(np.linalg.norm(s))))
        x, f, g = x_new, float(f_new), g_new
        if not _finite(x, f, g):
            return tr.finish(DIVERGED, x, f, g)
    return tr.finish(MAX_ITER, x, f, g)


BASELINES = {
    "gd": gradient_descent,
    "damped-newton": damped_newton,
    "newton-cg": newton_cg,
    "unreg-3rd": unregularized_third_order,
    "arc2": cubic_regularized_newton,
    "lbfgs": lbfgs,
}
