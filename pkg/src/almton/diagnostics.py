"""Empirical checks of the ALMTON worst-case bounds along a realized run.

Constants are estimated from the iterates only: ``Lambda_j`` are maxima of
derivative norms at the iterates and ``L_hat`` is the largest difference
quotient of the third derivative between consecutive distinct iterates.
Because ``L_hat`` may underestimate the global Lipschitz constant, check (b)
is advisory; checks (a), (c) and (d) only use quantities the run realizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import Problem
from .results import IterRecord, RunResult
from .solver import AlmtonConfig
from .tensors import operator_norm

SLACK = 1e-9


@dataclass
class TheoryBounds:
    Lambda: tuple[float, float, float]
    L_hat: float | None
    alpha_max: float
    sigma_max: float
    kappa_s: float | None
    n: int

    def __post_init__(self):
        vals = [*self.Lambda, self.alpha_max, self.sigma_max]
        vals += [v for v in (self.L_hat, self.kappa_s) if v is not None]
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise ValueError(f"bounds must be finite and nonnegative: {vals}")


def alpha_max(Lambda, n: int) -> float:
    L1, L2, L3 = Lambda
    return math.sqrt(3.0 * L1 * math.sqrt(n) * L3) + L2


def sigma_max(Lambda, n: int, L: float, cfg: AlmtonConfig) -> float:
    L1 = Lambda[0]
    return max(alpha_max(Lambda, n), 16.0 * L * L1 ** 2 / (cfg.c ** 2 * 3.0 * (1.0 - cfg.eta)))


def kappa_s(smax: float, L: float, cfg: AlmtonConfig) -> float:
    return (2.0 * smax + L) ** 2 / (cfg.eta * cfg.l)


def _iterates(run) -> list[np.ndarray]:
    """Distinct consecutive iterates of a run or ledger, final point included."""
    ledger = run.ledger if isinstance(run, RunResult) else list(run)
    pts = [np.asarray(r.x, dtype=float) for r in ledger]
    if isinstance(run, RunResult):
        pts.append(np.asarray(run.x, dtype=float))
    out: list[np.ndarray] = []
    for p in pts:
        if not out or not np.array_equal(p, out[-1]):
            out.append(p)
    return out


def estimate_bounds(run, problem: Problem, cfg: AlmtonConfig | None = None) -> TheoryBounds:
    """Estimate ``Lambda_j``, ``L_hat`` and the derived constants along a run."""
    cfg = cfg or AlmtonConfig()
    pts = _iterates(run)
    if not pts:
        raise ValueError("empty run: no iterates to estimate from")
    bundles = [problem.evaluate(x, 3) for x in pts]
    Lam = tuple(float(max(operator_norm(getattr(b, a)) for b in bundles)) for a in "gHT")
    L_hat = None
    if len(bundles) >= 2:
        L_hat = 0.0
        for b0, b1 in zip(bundles, bundles[1:]):
            dist = float(np.linalg.norm(b1.x - b0.x))
            L_hat = max(L_hat, operator_norm(b1.T - b0.T) / (2.0 * dist))
    n = problem.n
    amax = alpha_max(Lam, n)
    L = L_hat or 0.0
    smax = sigma_max(Lam, n, L, cfg)
    return TheoryBounds(Lam, L_hat, amax, smax,
                        kappa_s(smax, L, cfg) if L_hat is not None else None, n)


def complexity_bound(successes: int, smax: float, gamma: float) -> int:
    """Right-hand side of the total-iteration bound; ``q`` is clamped at zero."""
    q = max(0, math.ceil(math.log(smax) / math.log(gamma))) if smax > 0 else 0
    return (2 + q) * successes + 1 + q


@dataclass
class Violation:
    check: str
    k: int
    value: float
    bound: float


@dataclass
class AuditReport:
    bounds: TheoryBounds
    iterations: int
    successes: int
    checked: dict = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    def count(self, check: str) -> int:
        return sum(v.check == check for v in self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def text(self) -> str:
        b = self.bounds
        lines = [
            "audit",
            f"  Lambda = ({b.Lambda[0]:.6g}, {b.Lambda[1]:.6g}, {b.Lambda[2]:.6g})",
            f"  L_hat = {'absent' if b.L_hat is None else f'{b.L_hat:.6g}'}",
            f"  alpha_max = {b.alpha_max:.6g}  sigma_max = {b.sigma_max:.6g}  "
            f"kappa_s = {'absent' if b.kappa_s is None else f'{b.kappa_s:.6g}'}",
            f"  iterations = {self.iterations}  successes = {self.successes}",
        ]
        for name in ("a", "b", "c", "d"):
            lines.append(f"  check ({name}): {self.checked.get(name, 0)} checked, "
                         f"{self.count(name)} violations")
        for v in self.violations:
            lines.append(f"    ({v.check}) k={v.k}: {v.value:.6g} vs bound {v.bound:.6g}")
        lines.append("  note: L_hat is a trajectory estimate; (b) is advisory")
        return "\n".join(lines)

    def rows(self) -> list[dict]:
        rows = [{"check": name, "checked": self.checked.get(name, 0),
                 "violations": self.count(name), "k": "", "value": "", "bound": ""}
                for name in ("a", "b", "c", "d")]
        rows += [{"check": v.check, "checked": "", "violations": "", "k": v.k,
                  "value": v.value, "bound": v.bound} for v in self.violations]
        return rows


def audit_run(ledger: list[IterRecord], bounds: TheoryBounds,
              cfg: AlmtonConfig | None = None) -> AuditReport:
    """Check step-size, regularization and iteration-count bounds on a ledger."""
    cfg = cfg or AlmtonConfig()
    succ = sum(r.success for r in ledger)
    rep = AuditReport(bounds, len(ledger), succ, {n: 0 for n in "abcd"})
    smax_step = 4.0 * bounds.Lambda[0] / cfg.c
    L = bounds.L_hat or 0.0
    for r in ledger:
        if r.step_norm > 0:
            rep.checked["a"] += 1
            if r.step_norm > smax_step * (1 + SLACK) + SLACK:
                rep.violations.append(Violation("a", r.k, r.step_norm, smax_step))
        if r.success and np.isfinite(r.grad_norm_trial):
            rep.checked["b"] += 1
            lo = min(1.0, r.grad_norm_trial / (2.0 * bounds.sigma_max + L))
            if r.step_norm < lo - SLACK:
                rep.violations.append(Violation("b", r.k, r.step_norm, lo))
        if np.isfinite(r.sigma_tilde):
            rep.checked["c"] += 1
            if r.sigma_tilde > bounds.sigma_max * (1 + SLACK):
                rep.violations.append(Violation("c", r.k, r.sigma_tilde, bounds.sigma_max))
    if ledger:
        rep.checked["d"] = 1
        rhs = complexity_bound(succ, bounds.sigma_max, cfg.gamma)
        if len(ledger) > rhs:
            rep.violations.append(Violation("d", ledger[-1].k, len(ledger), rhs))
    return rep
