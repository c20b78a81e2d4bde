"""Benchmark harness: start grids, the Rosenbrock stress protocol and
Dolan-More performance profiles, with CSV and SVG output."""
from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import baselines as B
from .problems import Problem, get_problem
from .results import CONVERGED, RunResult
from .solver import AlmtonConfig, run as almton_run

INF = math.inf
METRICS = ("iterations", "f_evals", "time")

SolverFn = Callable[[Problem, np.ndarray, float, int], RunResult]


def _almton(strategy: str) -> SolverFn:
    def solve(p, x0, eps, budget):
        return almton_run(p, x0, AlmtonConfig(epsilon=eps, max_iter=budget, strategy=strategy))
    return solve


def _baseline(fn, **kw) -> SolverFn:
    def solve(p, x0, eps, budget):
        return fn(p, x0, B.BaselineConfig(epsilon=eps, max_iter=budget, **kw))
    return solve


SOLVERS: dict[str, SolverFn] = {
    "almton-simple": _almton("simple"),
    "almton-heuristic": _almton("heuristic"),
    "gd-0.01": _baseline(B.gradient_descent, alpha=0.01),
    "gd-0.05": _baseline(B.gradient_descent, alpha=0.05),
    "damped-newton": _baseline(B.damped_newton),
    "newton-cg": _baseline(B.newton_cg),
    "unreg-3rd": _baseline(B.unregularized_third_order),
    "arc2": _baseline(B.cubic_regularized_newton),
    "lbfgs": _baseline(B.lbfgs),
}


def get_solver(name: str) -> SolverFn:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; known: {sorted(SOLVERS)}") from None


# ---------------------------------------------------------------------------
# records


@dataclass
class GridSpec:
    problem: str
    counts: tuple[int, ...] = (30, 30)
    lo: Sequence[float] | None = None
    hi: Sequence[float] | None = None
    budget: int = 100
    epsilon: float = 1e-8

    def __post_init__(self):
        prob = get_problem(self.problem)
        self.counts = tuple(int(c) for c in np.broadcast_to(self.counts, (prob.n,)))
        self.lo = np.broadcast_to(prob.lo if self.lo is None else self.lo, (prob.n,)).astype(float)
        self.hi = np.broadcast_to(prob.hi if self.hi is None else self.hi, (prob.n,)).astype(float)
        if min(self.counts) < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if np.any(self.hi <= self.lo):
            raise ValueError("grid box is degenerate")
        if self.budget < 0 or self.epsilon <= 0:
            raise ValueError("budget must be nonnegative and epsilon positive")

    def starts(self) -> np.ndarray:
        axes = [np.linspace(a, b, c) for a, b, c in zip(self.lo, self.hi, self.counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class TrialRecord:
    problem: str
    start: tuple[float, ...]
    solver: str
    success: bool
    metric: float
    reason: str
    grad_norm: float
    seed: int

    def key(self):
        return (self.problem, self.start, self.seed)

    def sort_key(self):
        return (self.problem, self.seed, self.start, self.solver)


def metric_of(res: RunResult, metric: str) -> float:
    if metric == "iterations":
        return float(res.counts.iterations)
    if metric == "f_evals":
        return float(res.counts.f_evals)
    if metric == "time":
        return float(res.wall_time)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def to_record(problem: str, x0, solver: str, res: RunResult, metric: str, seed: int,
              epsilon: float) -> TrialRecord:
    ok = res.status == CONVERGED and res.grad_norm <= epsilon
    return TrialRecord(problem, tuple(float(v) for v in x0), solver, ok,
                       metric_of(res, metric) if ok else INF, res.status, float(res.grad_norm),
                       seed)


def _trial(args) -> TrialRecord:
    problem, x0, solver, eps, budget, metric, seed = args
    prob = get_problem(problem)
    res = get_solver(solver)(prob, np.asarray(x0, dtype=float), eps, budget)
    return to_record(problem, x0, solver, res, metric, seed, eps)


def run_trials(jobs: list, workers: int = 1) -> list[TrialRecord]:
    """Run trial tuples, in a process pool when ``workers > 1``; sorted output."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        recs = [_trial(j) for j in jobs]
    return sorted(recs, key=TrialRecord.sort_key)


def run_grid(spec: GridSpec, solvers: Sequence[str], metric: str = "iterations",
             workers: int = 1) -> list[TrialRecord]:
    """One trial per (grid start, solver)."""
    for s in solvers:
        get_solver(s)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    jobs = [(spec.problem, tuple(map(float, x0)), s, spec.epsilon, spec.budget, metric, i)
            for i, x0 in enumerate(spec.starts()) for s in solvers]
    return run_trials(jobs, workers)


# ---------------------------------------------------------------------------
# performance profiles


@dataclass
class ProfileCurve:
    solver: str
    ratios: np.ndarray           # sorted r_{p,s}, inf for failures
    taus: np.ndarray
    rho: np.ndarray
    n_problems: int = 0

    def at(self, tau: float) -> float:
        hit = np.isfinite(self.ratios) & (self.ratios <= tau)
        return float(np.count_nonzero(hit)) / self.n_problems

    @property
    def success_fraction(self) -> float:
        return float(np.count_nonzero(np.isfinite(self.ratios))) / self.n_problems


def ratio_matrix(t: np.ndarray) -> np.ndarray:
    """``r[p, s] = t[p, s] / min_s t[p, s]``; rows with no finite entry are all inf.

    A best time of zero gives ratio 1 to the solvers attaining it and inf to
    the rest.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.size == 0:
        raise ValueError("need a nonempty problems x solvers matrix")
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("metrics must be nonnegative or inf")
    best = t.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = t / best
    r[~np.isfinite(best[:, 0])] = INF
    r[(t == best) & np.isfinite(t)] = 1.0
    r[np.isnan(r)] = INF
    return r


def profile_from_matrix(t, solvers: Sequence[str], taus=None) -> list[ProfileCurve]:
    r = ratio_matrix(t)
    n_p = r.shape[0]
    if taus is None:
        finite = r[np.isfinite(r)]
        taus = np.unique(np.concatenate([[1.0], finite]))
    taus = np.asarray(sorted(taus), dtype=float)
    curves = []
    for j, s in enumerate(solvers):
        ratios = np.sort(r[:, j])
        rho = np.searchsorted(ratios, taus, side="right") / n_p
        curves.append(ProfileCurve(s, ratios, taus, rho, n_p))
    return curves


def performance_profile(records: Sequence[TrialRecord], taus=None) -> list[ProfileCurve]:
    """Dolan-More profiles over the problem set the records cover."""
    if not records:
        raise ValueError("no records to profile")
    solvers = sorted({r.solver for r in records})
    problems = sorted({r.key() for r in records})
    index = {p: i for i, p in enumerate(problems)}
    t = np.full((len(problems), len(solvers)), np.nan)
    for r in records:
        t[index[r.key()], solvers.index(r.solver)] = r.metric if r.success else INF
    if np.any(np.isnan(t)):
        raise ValueError("records do not cover a common problem set for every solver")
    return profile_from_matrix(t, solvers, taus)


# ---------------------------------------------------------------------------
# Rosenbrock stress protocol


@dataclass
class StressRow:
    solver: str
    n: int
    trials: int
    successes: int
    median_iterations: float
    median_f_evals: float
    median_time: float
    reasons: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def stress_starts(n: int, n_perturbed: int = 10, width: float = 0.5) -> list[tuple[int, np.ndarray]]:
    """Standard start ``(-1, ..., -1)`` (seed 0) plus uniformly perturbed copies."""
    base = -np.ones(n)
    starts = [(0, base)]
    for seed in range(1, n_perturbed + 1):
        rng = np.random.default_rng(seed)
        starts.append((seed, base + rng.uniform(-width, width, n)))
    return starts


def summarize(solver: str, n: int, results: Sequence[RunResult], epsilon: float) -> StressRow:
    ok = [r for r in results if r.status == CONVERGED and r.grad_norm <= epsilon]

    def med(vals):
        return float(statistics.median(vals)) if vals else math.nan

    reasons: dict = {}
    for r in results:
        reasons[r.status] = reasons.get(r.status, 0) + 1
    return StressRow(solver, n, len(results), len(ok),
                     med([r.counts.iterations for r in ok]), med([r.counts.f_evals for r in ok]),
                     med([r.wall_time for r in ok]), reasons)


def stress_protocol(n: int, solvers: Sequence[str], n_perturbed: int = 10,
                    epsilon: float = 1e-6, budget: int = 1000) -> list[StressRow]:
    """Rosenbrock stress test; medians are over successful runs only."""
    prob = get_problem(f"rosenbrock{n}")
    starts = stress_starts(n, n_perturbed)
    rows = []
    for s in solvers:
        fn = get_solver(s)
        rows.append(summarize(s, n, [fn(prob, x0, epsilon, budget) for _, x0 in starts], epsilon))
    return rows


def format_stress(rows: Sequence[StressRow]) -> str:
    head = f"{'solver':<18}{'n':>4}{'success':>12}{'iters':>10}{'fevals':>10}{'time(s)':>10}  reasons"
    lines = [head]
    for r in rows:
        reasons = ", ".join(f"{k}:{v}" for k, v in sorted(r.reasons.items()))
        lines.append(f"{r.solver:<18}{r.n:>4}{f'{r.successes}/{r.trials}':>12}"
                     f"{r.median_iterations:>10.0f}{r.median_f_evals:>10.0f}"
                     f"{r.median_time:>10.3f}  {reasons}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# emission


def _fmt(v: float) -> str:
    return repr(float(v))


def write_records_csv(records: Sequence[TrialRecord], path) -> Path:
    path = Path(path)
    dim = max((len(r.start) for r in records), default=0)
    header = ["problem", *[f"start_x{i}" for i in range(dim)], "solver", "success", "metric",
              "reason", "grad_norm", "seed"]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in records:
                start = [_fmt(v) for v in r.start] + [""] * (dim - len(r.start))
                w.writerow([r.problem, *start, r.solver, int(r.success), _fmt(r.metric),
                            r.reason, _fmt(r.grad_norm), r.seed])
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc
    return path


def read_records_csv(path) -> list[TrialRecord]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read records from {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    starts = [i for i, h in enumerate(header) if h.startswith("start_x")]
    col = {h: i for i, h in enumerate(header)}
    out = []
    for row in rows[1:]:
        start = tuple(float(row[i]) for i in starts if row[i] != "")
        out.append(TrialRecord(row[col["problem"]], start, row[col["solver"]],
                               bool(int(row[col["success"]])), float(row[col["metric"]]),
                               row[col["reason"]], float(row[col["grad_norm"]]),
                               int(row[col["seed"]])))
    return out


def write_rows_csv(rows: Sequence[dict], path, mode: str = "w") -> Path:
    """Plain dict rows (audit rows, stress rows) with a header from the first row."""
    path = Path(path)
    if not rows:
        if mode == "w":
            path.write_text("")
        return path
    with path.open(mode, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#7f7f7f", "#17becf"]


def profile_svg(curves: Sequence[ProfileCurve], title: str = "performance profile",
                width: int = 640, height: int = 420) -> str:
    """Step plot of ``rho_s(tau)`` with a log-scale tau axis."""
    if not curves:
        raise ValueError("no curves to plot")
    ml, mr, mt, mb = 60, 160, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    finite = np.concatenate([c.taus for c in curves])
    tmax = max(2.0, float(np.max(finite[np.isfinite(finite)])) * 1.5)
    lmax = math.log10(tmax)

    def X(tau):
        return ml + pw * math.log10(max(tau, 1.0)) / lmax

    def Y(rho):
        return mt + ph * (1.0 - rho)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{ml + pw / 2:.1f}" y="{mt - 15}" text-anchor="middle" '
             f'font-size="14">{escape(title)}</text>',
             f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
             f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for d in range(int(math.floor(lmax)) + 1):
        x = X(10.0 ** d)
        parts.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" y2="{mt + ph + 5}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{mt + ph + 18}" text-anchor="middle" '
                     f'font-size="11">1e{d}</text>')
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = Y(v)
        parts.append(f'<line x1="{ml - 5}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{v:g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
                 f'font-size="12">tau (log scale)</text>')
    parts.append(f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 15 {mt + ph / 2:.1f})">rho(tau)</text>')
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        pts = [(X(1.0), Y(c.at(1.0)))]
        prev = c.at(1.0)
        for tau, rho in zip(c.taus, c.rho):
            if tau <= 1.0:
                continue
            pts.append((X(tau), Y(prev)))
            pts.append((X(tau), Y(rho)))
            prev = rho
        pts.append((X(tmax), Y(prev)))
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                     f'points="{coords}"/>')
        ly = mt + 15 + 18 * i
        parts.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw + 35}" y="{ly + 4}" font-size="11">'
                     f'{escape(c.solver)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_profile_svg(curves: Sequence[ProfileCurve], path, title: str = "performance profile"):
    path = Path(path)
    try:
        path.write_text(profile_svg(curves, title))
    except OSError as exc:
        raise OSError(f"cannot write profile to {path}: {exc}") from exc
    return path


def profile_rows(curves: Sequence[ProfileCurve]) -> list[dict]:
    return [{"solver": c.solver, "tau": _fmt(t), "rho": _fmt(r)}
            for c in curves for t, r in zip(c.taus, c.rho)]
