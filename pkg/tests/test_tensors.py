import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from almton.problems import quadratic, rosenbrock
from almton.tensors import (DerivativeBundle, contract, fd_check, min_eigenvalue,
                            operator_norm, sym_matrix, sym_tensor)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_contract_zero_tensor():
    assert contract(np.zeros((3, 3, 3)), np.array([1.0, -2.0, 0.5]), 3) == 0.0


def test_contract_scalar_cubic():
    assert contract(np.array([[[6.0]]]), np.array([2.0]), 3) == 48.0


def test_contract_matches_triple_loop(rng):
    T = sym_tensor(rng.normal(size=(3, 3, 3)))
    s = rng.normal(size=3)
    loop = sum(T[i, j, k] * s[i] * s[j] * s[k] for i, j, k in itertools.product(range(3), repeat=3))
    assert contract(T, s, 3) == pytest.approx(loop, rel=1e-13)
    M = contract(T, s, 1)
    v = contract(T, s, 2)
    assert np.allclose(M, sum(s[i] * T[i] for i in range(3)))
    assert np.allclose(v, [s @ T[i] @ s for i in range(3)])


def test_contract_dimension_mismatch():
    with pytest.raises(ValueError):
        contract(np.zeros((2, 2, 2)), np.zeros(3), 3)
    with pytest.raises(ValueError):
        contract(np.zeros((2, 2, 2)), np.zeros(2), 4)


def test_min_eigenvalue_examples(rng):
    assert min_eigenvalue(np.eye(3)) == 1.0
    assert min_eigenvalue(np.diag([-2.0, 5.0])) == pytest.approx(-2.0, abs=1e-12)
    A = sym_matrix(rng.normal(size=(5, 5)))
    ref = np.min(np.linalg.eig(A)[0].real)
    assert abs(min_eigenvalue(A) - ref) <= 1e-10


def test_min_eigenvalue_rejects_nonfinite():
    with pytest.raises(ValueError):
        min_eigenvalue(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_operator_norm_examples(rng):
    assert operator_norm(np.zeros((2, 2, 2))) == 0.0
    assert operator_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0)
    assert operator_norm(np.array([3.0, 4.0])) == pytest.approx(5.0)
    T = sym_tensor(rng.normal(size=(2, 2, 2)))
    v = rng.normal(size=(10_000, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    sampled = np.max(np.abs(np.einsum("ijk,si,sj,sk->s", T, v, v, v)))
    assert operator_norm(T) >= sampled - 1e-12


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 3, 3), elements=finite))
def test_symmetrization_is_permutation_invariant(data):
    T = sym_tensor(data)
    for perm in itertools.permutations(range(3)):
        assert np.allclose(T, np.transpose(T, perm), atol=1e-12, rtol=0)
    assert np.array_equal(sym_tensor(T), T) or np.allclose(sym_tensor(T), T, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 3, 3), elements=finite), arrays(float, 3, elements=finite),
       st.floats(-5, 5, allow_nan=False))
def test_cubic_form_homogeneity(data, s, alpha):
    T = sym_tensor(data)
    lhs = contract(T, alpha * s, 3)
    rhs = alpha ** 3 * contract(T, s, 3)
    scale = abs(alpha) ** 3 * float(np.sum(np.abs(T))) * float(np.max(np.abs(s), initial=0)) ** 3
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300) + 1e-300


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 4), elements=finite), st.sampled_from([-1.0, 0.0, 1.0]))
def test_eigenvalue_shift(data, t):
    A = sym_matrix(data)
    assert abs(min_eigenvalue(A + t * np.eye(4)) - (min_eigenvalue(A) + t)) <= 1e-9


def test_bundle_validates_shapes():
    with pytest.raises(ValueError):
        DerivativeBundle(np.zeros(2), 0.0, np.zeros(3))
    b = DerivativeBundle(np.zeros(2), 1.0, np.zeros(2), np.eye(2))
    assert b.order == 2 and b.n == 2
    with pytest.raises(ValueError):
        b.g[0] = 1.0


def test_fd_check_quadratic_exact(rng):
    A = sym_matrix(rng.normal(size=(4, 4)))
    prob = quadratic(A)
    x = rng.normal(size=4)
    rep = fd_check(prob.evaluate(x), prob.evaluate, 1e-5)
    assert rep.gradient <= 1e-8
    assert rep.tensor <= 1e-5


def test_fd_check_rosenbrock():
    prob = rosenbrock(2)
    rep = fd_check(prob.evaluate([-1.2, 1.0]), prob.evaluate, 1e-5)
    assert rep.worst() <= 1e-4


def test_fd_check_detects_corruption():
    prob = rosenbrock(2)
    good = prob.evaluate([-1.2, 1.0])
    bad = DerivativeBundle(good.x, good.f, good.g * 1.1, good.H, good.T)
    assert fd_check(bad, prob.evaluate).gradient > 1e-2
    with pytest.raises(ValueError):
        fd_check(good, prob.evaluate, h=0.0)
