"""Acceptance criteria, each checked at its stated tolerance.

Every test records a PASS or FAIL line (shown in the terminal summary). A
criterion that cannot be met by a faithful implementation is reported as
FAIL and marked xfail with the reason, never loosened.
"""
import time

import numpy as np
import pytest

from acceptance_log import report, verdict
from almton import bench
from almton.diagnostics import audit_run, estimate_bounds
from almton.problems import REGISTRY, classic_2d_suite, get_problem, quadratic, rosenbrock
from almton.sdp import solve_cubic
from almton.solver import HEURISTIC, SIMPLE, AlmtonConfig, run
from almton.tensors import fd_check
from oracles import multistart_cubic_min, random_cubic

STRATEGIES = (SIMPLE, HEURISTIC)


@pytest.fixture(scope="module")
def batch():
    """Classic-suite batch: 4 problems x 2 strategies x 5 random starts."""
    rng = np.random.default_rng(2024)
    runs = []
    for prob in classic_2d_suite():
        starts = prob.sample(rng, 5)
        for strategy in STRATEGIES:
            cfg = AlmtonConfig(strategy=strategy)
            for x0 in starts:
                runs.append((prob, cfg, run(prob, x0, cfg)))
    return runs


def test_criterion_1_subproblem_oracle():
    rng = np.random.default_rng(12345)
    t0 = time.perf_counter()
    agree = found = 0
    worst = 0.0
    for k in range(100):
        p = random_cubic(rng, int(rng.integers(2, 4)))
        ref = multistart_cubic_min(p, starts=200, seed=k)
        out = solve_cubic(p, 1e-6)
        agree += (ref is not None) == out.found
        if ref is not None and out.found:
            found += 1
            worst = max(worst, float(np.linalg.norm(out.xbar - ref)))
    elapsed = time.perf_counter() - t0
    ok = agree >= 98 and worst <= 1e-4 and elapsed <= 120
    verdict(1, ok, f"status agreement {agree}/100, {found} minimizers, max position error "
                   f"{worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_decrease_identity(batch):
    checked = 0
    worst = 0.0
    for _, _, res in batch[:30]:
        for r in res.ledger:
            if r.success and r.sigma_tilde == 0:
                err = abs(r.model_decrease - r.identity_decrease) / (1 + abs(r.model_decrease))
                worst = max(worst, err)
                checked += 1
    ok = checked > 0 and worst <= 1e-8
    verdict(2, ok, f"{checked} unregularized accepted steps over 30 runs, worst scaled gap "
                   f"{worst:.1e}")
    assert ok


def test_criterion_3_monotone_and_reset(batch):
    extra = [(rosenbrock(2), AlmtonConfig(strategy=s), run(rosenbrock(2), [-1.2, 1.0],
                                                           AlmtonConfig(strategy=s)))
             for s in STRATEGIES]
    mono = reset = steps = 0
    for _, _, res in batch + extra:
        led = res.ledger
        fs = [r.f for r in led] + [res.f]
        mono += sum(b > a + 1e-12 for a, b in zip(fs, fs[1:]))
        for a, b in zip(led, led[1:]):
            reset += a.success and (a.sigma_next != 0 or b.sigma != 0)
        steps += len(led)
    ok = mono == 0 and reset == 0
    verdict(3, ok, f"{len(batch) + len(extra)} runs, {steps} iterations: {mono} monotonicity "
                   f"and {reset} reset violations")
    assert ok


def test_criterion_4_quadratic_one_step():
    rng = np.random.default_rng(99)
    worst = 0.0
    bad = 0
    for _ in range(10):
        n = int(rng.integers(1, 11))
        A = rng.normal(size=(n, n))
        A = A @ A.T + 0.5 * np.eye(n)
        b = rng.normal(size=n)
        prob = quadratic(A, b)
        x0 = rng.uniform(-3, 3, n)
        newton = -np.linalg.solve(A, A @ x0 + b)
        for strategy in STRATEGIES:
            res = run(prob, x0, AlmtonConfig(strategy=strategy))
            one = res.converged and res.counts.iterations == 1 and res.counts.successful == 1
            bad += not one
            step = res.x - x0
            worst = max(worst, float(np.linalg.norm(step - newton)))
    ok = bad == 0 and worst <= 1e-8
    verdict(4, ok, f"20 runs, {bad} not converged in exactly one successful iteration, "
                   f"max step error vs Newton {worst:.1e}")
    assert ok


def test_criterion_5_rosenbrock():
    details = []
    within_budget = True
    attained = True
    for strategy in STRATEGIES:
        short = run(rosenbrock(2), [-1.2, 1.0], AlmtonConfig(strategy=strategy))
        long = run(rosenbrock(2), [-1.2, 1.0], AlmtonConfig(strategy=strategy, max_iter=2000))
        within_budget &= short.converged
        dist = float(np.linalg.norm(long.x - 1.0))
        attained &= long.converged and dist <= 1e-6 and long.grad_norm <= 1e-8
        details.append(f"{strategy}: {short.status} at 100 (|g| {short.grad_norm:.1e}), "
                       f"converges in {long.counts.iterations} iterations, |x - 1| {dist:.1e}")
    verdict(5, within_budget and attained, "; ".join(details))
    assert attained, "both strategies must reach (1, 1) once the budget is lifted"
    if not within_budget:
        pytest.xfail("the 100-iteration budget is unattainable: away from the minimizer the "
                     "unregularized cubic model of this function has no local minimizer, so "
                     "steps are taken at sigma near alpha_LM")


@pytest.mark.slow
def test_criterion_5_report_n5_protocol():
    t0 = time.perf_counter()
    rows = bench.stress_protocol(5, ["almton-simple", "almton-heuristic"])
    elapsed = time.perf_counter() - t0
    print()
    print(bench.format_stress(rows))
    summary = ", ".join(f"{r.solver} {r.successes}/{r.trials} median iters "
                        f"{r.median_iterations:.0f}" for r in rows)
    report(5, f"n=5 protocol, not asserted: {summary}; {elapsed:.0f} s (limit 1800 s)")
    assert elapsed <= 1800


def test_criterion_6_baselines_rosenbrock():
    rows = [row for n in (5, 20) for row in bench.stress_protocol(n, ["newton-cg", "lbfgs"])]
    ok = all(r.successes == r.trials for r in rows)
    verdict(6, ok, ", ".join(f"{r.solver} n={r.n} {r.successes}/{r.trials} "
                             f"(median {r.median_iterations:.0f} iters)" for r in rows))
    assert ok


def test_criterion_7_bound_audit(batch):
    counts = {c: 0 for c in "abcd"}
    checked = {c: 0 for c in "abcd"}
    for prob, cfg, res in batch:
        rep = audit_run(res.ledger, estimate_bounds(res, prob, cfg), cfg)
        for c in counts:
            counts[c] += rep.count(c)
            checked[c] += rep.checked[c]
    ok = counts["a"] == counts["c"] == counts["d"] == 0
    verdict(7, ok, f"{len(batch)} runs; violations a={counts['a']} c={counts['c']} "
                   f"d={counts['d']} (advisory b={counts['b']} of {checked['b']})")
    assert ok


def test_criterion_8_profiles():
    inf = np.inf
    t = np.array([[2.0, 4.0, inf], [5.0, 5.0, 10.0], [inf, inf, inf]])
    expect = {"A": [2 / 3, 2 / 3, 2 / 3], "B": [1 / 3, 2 / 3, 2 / 3], "C": [0.0, 1 / 3, 1 / 3]}
    curves = bench.profile_from_matrix(t, ["A", "B", "C"], taus=[1.0, 2.0, 4.0])
    exact = all(list(c.rho) == expect[c.solver] for c in curves)

    recs = []
    for name in ("himmelblau", "camel3"):
        spec = bench.GridSpec(name, (4, 4), budget=100)
        recs += bench.run_grid(spec, ["almton-simple", "damped-newton", "gd-0.05"])
    invariants = True
    for cv in bench.performance_profile(recs):
        invariants &= bool(np.all(np.diff(cv.rho) >= 0) and np.all((cv.rho >= 0) & (cv.rho <= 1)))
        invariants &= cv.at(np.inf) == cv.success_fraction
        invariants &= cv.rho[-1] == cv.success_fraction
    r = bench.ratio_matrix(np.array([[x.metric for x in recs if x.key() == k]
                                     for k in sorted({x.key() for x in recs})]))
    finite_rows = np.isfinite(r).any(axis=1)
    invariants &= bool(np.all(r[finite_rows].min(axis=1) == 1.0))
    ok = exact and invariants
    verdict(8, ok, f"3x3 oracle exact: {exact}; invariants on {len(recs)} grid records: "
                   f"{invariants}")
    assert ok


def test_criterion_9_derivatives():
    names = ["rosenbrock2", "rosenbrock5", "rosenbrock10", *REGISTRY]
    rng = np.random.default_rng(9)
    worst = np.zeros(3)
    for name in names:
        prob = get_problem(name)
        for x in prob.sample(rng, 20):
            rep = fd_check(prob.evaluate(x), prob.evaluate)
            worst = np.maximum(worst, [rep.gradient, rep.hessian, rep.tensor])
    ok = bool(np.all(worst <= [1e-6, 1e-5, 1e-4]))
    verdict(9, ok, f"{len(names)} problems x 20 points, worst relative errors "
                   f"g {worst[0]:.1e} H {worst[1]:.1e} T {worst[2]:.1e}")
    assert ok
