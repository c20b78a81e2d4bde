"""Adaptive Levenberg-Marquardt third-order Newton method.

Each iteration builds the cubic Taylor model at ``x_k``, adds
``sigma ||s||^2`` and takes the strict local minimizer of that cubic (found
by the SDP subsolver) as the trial point.  The unregularized model is tried
first after every success; regularization is switched on or raised only when
the model has no acceptable minimizer or the step is rejected.

Two strategies produce the trial step:

* ``simple``: one subproblem solve per iteration at the current ``sigma``;
  any trouble rejects the iteration and raises ``sigma`` in the outer loop.
* ``heuristic``: an inner loop raises the phase regularization until the
  trial point has enough curvature and predicts a model decrease.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .cubic import CubicPoly, alpha_lm, decrease_identity, from_bundle, regularize
from .problems import Problem
from .results import (CONVERGED, MAX_ITER, NAN, SIGMA_EXCEEDED, SUBSOLVER_ERROR, Counts,
                      IterRecord, RunResult)
from .tensors import DerivativeBundle, min_eigenvalue

Array = np.ndarray
log = logging.getLogger(__name__)

SIMPLE = "simple"
HEURISTIC = "heuristic"
DENOM_FLOOR = 1e-14


@dataclass
class AlmtonConfig:
    epsilon: float = 1e-8
    c: float = 1e-2
    l: float | None = None           # defaults to c / 10
    eta: float = 0.1
    gamma: float = 3.0
    max_iter: int = 100
    sigma_cap: float = 1e10
    strategy: str = SIMPLE
    inner_cap: int = 60
    backend: str = "clarabel"
    sdp_tol_loose: float = 1e-3
    sdp_tol_tight: float = 1e-6
    sdp_tol_switch: float = 1e-3     # gradient norm below which the tight tolerance is used
    roundoff_guard: bool = True      # pad the ratio by a few ulps of f near convergence

    def __post_init__(self):
        if self.l is None:
            self.l = self.c / 10.0
        if self.c <= 0:
            raise ValueError("c must be positive")
        if not 0 < self.l <= self.c / 6.0:
            raise ValueError(f"l must lie in (0, c/6], got l={self.l}, c={self.c}")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.strategy not in (SIMPLE, HEURISTIC):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.max_iter < 0 or self.inner_cap < 1:
            raise ValueError("iteration caps must be nonnegative (inner_cap >= 1)")

    def sdp_tol(self, grad_norm: float) -> float:
        return self.sdp_tol_loose if grad_norm > self.sdp_tol_switch else self.sdp_tol_tight


class SigmaExceeded(RuntimeError):
    pass


@dataclass
class Phase:
    """Outcome of the model phase at one iterate."""

    s: Array
    sigma_tilde: float
    valid: bool
    xbar: Array | None = None
    trial: DerivativeBundle | None = None
    lambda_bar: float = NAN
    model_value: float = NAN
    poly: CubicPoly | None = None
    status: str = ""
    solves: int = 0
    derivative_evals: int = 0
    history: list = field(default_factory=list)


def _solve_model(problem: Problem, bundle: DerivativeBundle, sigma: float, tol: float,
                 backend, phase: Phase):
    """One subproblem solve at ``sigma``; returns ``(poly, xbar, trial, lambda_bar)``."""
    poly = regularize(from_bundle(bundle), sigma)
    out = sdp.solve_cubic(poly, tol, backend)
    phase.solves += 1
    phase.status = out.status
    if not out.found:
        phase.history.append((sigma, out.status, NAN))
        return poly, None, None, NAN
    xbar = bundle.x + out.xbar
    trial = problem.evaluate(xbar)
    phase.derivative_evals += 1
    lam = min_eigenvalue(trial.H) + 2.0 * sigma
    phase.history.append((sigma, out.status, lam))
    return poly, out.xbar, trial, lam


def step_simple(problem: Problem, bundle: DerivativeBundle, sigma: float, cfg: AlmtonConfig,
                backend=None, tol: float | None = None) -> Phase:
    """Single solve at ``sigma``; invalid unless a minimizer with curvature ``>= c`` exists."""
    tol = cfg.sdp_tol(np.linalg.norm(bundle.g)) if tol is None else tol
    phase = Phase(np.zeros(bundle.n), sigma, False)
    poly, s, trial, lam = _solve_model(problem, bundle, sigma, tol, backend, phase)
    phase.poly = poly
    if s is not None:
        phase.lambda_bar = lam
        if lam >= cfg.c:
            phase.s, phase.valid = s, True
            phase.xbar, phase.trial = bundle.x + s, trial
            phase.model_value = poly.eval(s)
    return phase


def heuristic_increase(sigma: float, alpha: float, lambda_bar: float, cfg: AlmtonConfig) -> float:
    """Inner-loop update ``max{alpha, gamma max{1, sigma}, sigma + (c - lambda)_+}``."""
    bump = sigma + max(cfg.c - lambda_bar, 0.0) if np.isfinite(lambda_bar) else sigma
    return max(alpha, cfg.gamma * max(1.0, sigma), bump)


def step_heuristic(problem: Problem, bundle: DerivativeBundle, sigma: float, cfg: AlmtonConfig,
                   backend=None, tol: float | None = None, alpha: float | None = None) -> Phase:
    """Raise the phase regularization until the trial point passes all three tests."""
    tol = cfg.sdp_tol(np.linalg.norm(bundle.g)) if tol is None else tol
    alpha = alpha_lm(bundle) if alpha is None else alpha
    phase = Phase(np.zeros(bundle.n), sigma, False)
    sig = sigma
    for _ in range(cfg.inner_cap):
        poly, s, trial, lam = _solve_model(problem, bundle, sig, tol, backend, phase)
        phase.poly, phase.sigma_tilde, phase.lambda_bar = poly, sig, lam
        if s is not None:
            mval = poly.eval(s)
            if lam >= cfg.c and mval <= bundle.f:
                phase.s, phase.valid = s, True
                phase.xbar, phase.trial, phase.model_value = bundle.x + s, trial, mval
                return phase
        sig = heuristic_increase(sig, alpha, lam, cfg)
        if sig > cfg.sigma_cap:
            raise SigmaExceeded(f"phase regularization {sig:.3g} above cap")
    raise SigmaExceeded(f"no valid step after {cfg.inner_cap} inner passes")


def roundoff_pad(f_k: float) -> float:
    """A few ulps of ``f_k``: decreases below this are indistinguishable from noise."""
    return 10.0 * np.finfo(float).eps * max(1.0, abs(f_k))


def acceptance_ratio(f_k: float, f_bar: float, s_k, sigma_tilde: float, model_val: float,
                     cfg: AlmtonConfig, pad: float = 0.0) -> float:
    """Actual over predicted decrease, with ``l ||s||^2`` standing in when unregularized.

    ``pad`` is added to both decreases; it only matters once they reach the
    rounding level of ``f``, where the plain quotient is noise.
    """
    s_k = np.asarray(s_k, dtype=float)
    if not np.any(s_k):
        return -np.inf
    if sigma_tilde == 0:
        return (f_k - f_bar + pad) / (cfg.l * float(s_k @ s_k) + pad)
    denom = f_k - model_val
    if denom < 0 or denom + pad <= DENOM_FLOOR:
        return -np.inf
    return (f_k - f_bar + pad) / (denom + pad)


def sigma_update(strategy: str, sigma_k: float, sigma_tilde_k: float, alpha: float,
                 cfg: AlmtonConfig) -> float:
    """Regularization for the next iteration after a rejected step."""
    if strategy == SIMPLE:
        return max(1.0, alpha) if sigma_k == 0 else cfg.gamma * sigma_k
    if strategy == HEURISTIC:
        return max(alpha, cfg.gamma * max(1.0, sigma_tilde_k))
    raise ValueError(f"unknown strategy {strategy!r}")


def run(problem: Problem, x0, cfg: AlmtonConfig | None = None, backend=None) -> RunResult:
    """Minimize ``problem`` from ``x0`` with ALMTON."""
    cfg = cfg or AlmtonConfig()
    backend = backend if backend is not None else sdp.make_backend(cfg.backend)
    t0 = time.perf_counter()
    name = f"almton-{cfg.strategy}"
    counts = Counts()
    ledger: list[IterRecord] = []

    bundle = problem.evaluate(np.asarray(x0, dtype=float))
    counts.f_evals += 1
    counts.derivative_evals += 1
    sigma = 0.0
    status = MAX_ITER

    def finish(status: str) -> RunResult:
        counts.iterations = len(ledger)
        return RunResult(name, status, np.array(bundle.x), bundle.f,
                         float(np.linalg.norm(bundle.g)), counts, ledger,
                         time.perf_counter() - t0)

    for k in range(cfg.max_iter + 1):
        gnorm = float(np.linalg.norm(bundle.g))
        if gnorm <= cfg.epsilon:
            return finish(CONVERGED)
        if k == cfg.max_iter:
            break
        if not (np.isfinite(bundle.f) and np.all(np.isfinite(bundle.H))
                and np.all(np.isfinite(bundle.T))):
            status = SUBSOLVER_ERROR
            break
        alpha = alpha_lm(bundle)
        rec = IterRecord(k, np.array(bundle.x), bundle.f, gnorm, False, sigma=sigma,
                         alpha_lm=alpha, lambda_min_hk=min_eigenvalue(bundle.H))
        try:
            if cfg.strategy == SIMPLE:
                phase = step_simple(problem, bundle, sigma, cfg, backend)
            else:
                phase = step_heuristic(problem, bundle, sigma, cfg, backend, alpha=alpha)
        except SigmaExceeded as exc:
            log.info("%s: %s", name, exc)
            status = SIGMA_EXCEEDED
            break
        except ValueError as exc:
            log.warning("%s: subsolver error: %s", name, exc)
            status = SUBSOLVER_ERROR
            break
        counts.sdp_solves += phase.solves
        counts.derivative_evals += phase.derivative_evals
        counts.f_evals += phase.derivative_evals

        rec.sigma_tilde = phase.sigma_tilde
        rec.subsolver_status = phase.status
        rec.inner_count = phase.solves
        rec.lambda_bar = phase.lambda_bar
        rec.step_norm = float(np.linalg.norm(phase.s))

        if phase.valid:
            trial = phase.trial
            rec.f_trial = trial.f
            rec.grad_norm_trial = float(np.linalg.norm(trial.g))
            rec.model_decrease = bundle.f - phase.model_value
            model_hess = phase.poly.hessian(phase.s)
            rec.lambda_min_model_bar = min_eigenvalue(model_hess)
            if phase.sigma_tilde == 0:
                rec.identity_decrease = decrease_identity(phase.poly, phase.s,
                                                          phase.poly.Q, model_hess)
            pad = roundoff_pad(bundle.f) if cfg.roundoff_guard else 0.0
            rho = acceptance_ratio(bundle.f, trial.f, phase.s, phase.sigma_tilde,
                                   phase.model_value, cfg, pad)
        else:
            rho = -np.inf
        rec.rho = rho
        rec.success = bool(rho >= cfg.eta)

        if rec.success:
            counts.successful += 1
            bundle = phase.trial
            sigma = 0.0
        else:
            if sigma == 0:
                counts.unsuccessful_sigma0 += 1
            else:
                counts.unsuccessful_sigmapos += 1
            sigma = sigma_update(cfg.strategy, sigma, phase.sigma_tilde, alpha, cfg)
        rec.sigma_next = sigma
        ledger.append(rec)
        if sigma > cfg.sigma_cap:
            status = SIGMA_EXCEEDED
            break

    return finish(status)
