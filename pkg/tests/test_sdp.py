import numpy as np
import pytest

from almton.cubic import CubicPoly
from almton.sdp import (MINIMIZER_FOUND, NO_LOCAL_MIN, SOLVER_FAILURE, BackendResult,
                        build_sdp, make_backend, polish, solve_cubic)
from oracles import multistart_cubic_min, random_cubic

S3 = CubicPoly(0.0, [-3.0], [[0.0]], [[[6.0]]])


def test_build_dimensions():
    prog = build_sdp(S3)
    assert prog.num_eq == 2
    assert [blk.size for blk in prog.blocks] == [2, 2]
    p2 = CubicPoly(0.0, [1.0, 0.0], np.eye(2), np.zeros((2, 2, 2)))
    assert build_sdp(p2).num_vars == 8


def test_rank_one_substitution(rng):
    p = random_cubic(rng, 3)
    prog = build_sdp(p)
    x = rng.normal(size=3)
    z = prog.pack(np.outer(x, x), x, 0.0, np.zeros(3))
    grad = prog.A_eq[:3] @ z - prog.b_eq[:3]
    assert np.allclose(grad, p.grad(x), atol=1e-12)
    # auxiliary rows define v_i = Tr(H_i X) + (Q x)_i
    v = np.einsum("ijk,j,k->i", p.H, x, x) + p.Q @ x
    z = prog.pack(np.outer(x, x), x, 0.0, v)
    assert np.allclose(prog.A_eq[3:] @ z - prog.b_eq[3:], 0.0, atol=1e-12)


def test_moment_block_is_rank_one_at_lifted_point(rng):
    p = random_cubic(rng, 2)
    prog = build_sdp(p)
    x = rng.normal(size=2)
    z = prog.pack(np.outer(x, x), x, 0.0, np.zeros(2))
    M = prog.blocks[1].value(z)
    assert np.allclose(M, np.outer([*x, 1], [*x, 1]))


def test_solve_analytic_cases():
    out = solve_cubic(S3, 1e-6)
    assert out.status == MINIMIZER_FOUND
    assert abs(out.xbar[0] - 1.0) <= 1e-6
    assert solve_cubic(CubicPoly(0.0, [0.0], [[0.0]], [[[6.0]]]), 1e-6).status == NO_LOCAL_MIN


def test_convex_quadratic_minimizer(rng):
    A = rng.normal(size=(3, 3))
    A = A @ A.T + np.eye(3)
    b = rng.normal(size=3)
    out = solve_cubic(CubicPoly(0.0, b, A, np.zeros((3, 3, 3))), 1e-6)
    assert out.found
    assert np.allclose(out.xbar, np.linalg.solve(A, -b), atol=1e-10)


def test_input_validation():
    with pytest.raises(ValueError):
        solve_cubic(S3, 1.0)
    with pytest.raises(ValueError):
        solve_cubic(CubicPoly(0.0, [np.inf], [[0.0]], [[[1.0]]]), 1e-6)
    with pytest.raises(ValueError):
        make_backend("nope")


def test_polish_examples():
    x0 = np.array([1.0])
    assert polish(S3, x0) is x0
    assert abs(polish(S3, np.array([0.9]), maxiter=5)[0] - 1.0) <= 1e-12
    # singular Hessian at the start: returned unchanged
    z = np.array([0.0])
    assert polish(S3, z) is z


def test_oracle_agreement_subset(rng):
    for k in range(20):
        p = random_cubic(rng, int(rng.integers(2, 4)))
        ref = multistart_cubic_min(p, seed=k)
        out = solve_cubic(p, 1e-6)
        if ref is not None:
            assert out.found
            assert np.linalg.norm(out.xbar - ref) <= 1e-4
        if out.found:
            # certificate soundness
            assert out.kkt_grad_norm <= 1e-6 and out.kkt_min_eig >= -1e-6


def test_deterministic(rng):
    p = random_cubic(rng, 3)
    a, b = solve_cubic(p, 1e-6), solve_cubic(p, 1e-6)
    assert a.status == b.status
    if a.found:
        assert np.array_equal(a.xbar, b.xbar)


def test_cvxopt_backend_agrees():
    out = solve_cubic(S3, 1e-6, make_backend("cvxopt"))
    assert out.found and abs(out.xbar[0] - 1.0) <= 1e-6
    assert solve_cubic(S3, 1e-6, make_backend("auto")).found


class _Raising:
    def solve(self, prog, tol):
        raise RuntimeError("backend crashed")


class _Infeasible:
    def solve(self, prog, tol):
        return BackendResult("infeasible", None, raw_status="PrimalInfeasible")


def test_backend_faults_map_to_statuses():
    assert solve_cubic(S3, 1e-6, _Raising()).status == SOLVER_FAILURE
    assert solve_cubic(S3, 1e-6, _Infeasible()).status == NO_LOCAL_MIN
