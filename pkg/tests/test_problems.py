import itertools

import numpy as np
import pytest

from almton.problems import (REGISTRY, classic_2d_suite, fd_problem_wrapper, get_problem,
                             hairpin_barrier, hairpin_surrogate, quadratic, rosenbrock)
from almton.tensors import fd_check
from oracles import rosenbrock_reference

ALL = ["rosenbrock2", "rosenbrock3", "rosenbrock5", *REGISTRY]


def test_rosenbrock_values():
    p = rosenbrock(4)
    b = p.evaluate(np.ones(4))
    assert b.f == 0.0 and not np.any(b.g)
    assert rosenbrock(2).value([0.0, 0.0]) == 1.0
    assert rosenbrock(2).value([-1.2, 1.0]) == pytest.approx(24.2, rel=1e-14)
    with pytest.raises(ValueError):
        rosenbrock(1)


def test_rosenbrock_matches_loop_reference(rng):
    p = rosenbrock(5)
    for x in p.sample(rng, 10):
        f, g, H = rosenbrock_reference(x)
        b = p.evaluate(x)
        assert b.f == pytest.approx(f, rel=1e-13)
        assert np.allclose(b.g, g, rtol=1e-12)
        assert np.allclose(b.H, H, rtol=1e-12)


def test_rosenbrock_tensor_pattern():
    # only d3/dx_i^3 = 2400 x_i and d3/dx_i^2 dx_{i+1} = -400 are nonzero
    x = np.array([0.3, -0.7, 1.1, 2.0])
    T = rosenbrock(4).evaluate(x).T
    ref = np.zeros((4, 4, 4))
    for i in range(3):
        ref[i, i, i] = 2400 * x[i]
        for perm in set(itertools.permutations((i, i, i + 1))):
            ref[perm] = -400.0
    assert np.allclose(T, ref)


def test_classic_examples():
    suite = {p.name: p for p in classic_2d_suite()}
    assert len(suite) == 4
    assert suite["himmelblau"].value([3.0, 2.0]) == 0.0
    assert suite["camel3"].value([0.0, 0.0]) == 0.0
    for p in suite.values():
        assert len(p.known_minimizers) >= 2
        for m in p.known_minimizers:
            assert np.linalg.norm(p.evaluate(m, 1).g) <= 1e-8
            assert np.all(np.linalg.eigvalsh(p.evaluate(m, 2).H) > 0)


def test_hairpin_barrier():
    assert hairpin_barrier(0.3, 0.0, 1.0, 3) == (0.0, 0.0, 0.0, 0.0)
    f, d1 = hairpin_barrier(2.0, 0.0, 1.0, 1)
    assert (f, d1) == (1.0, 4.0)
    assert hairpin_barrier(-1.0, 0.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        hairpin_barrier(0.0, 1.0, 1.0)


def test_hairpin_barrier_third_derivative_continuity():
    # the third derivative is 24 d next to a knot, so sampled jumps vanish like 24 h
    for knot in (0.0, 1.0):
        assert hairpin_barrier(knot, 0.0, 1.0, 3)[3] == 0.0
        for h in (1e-2, 1e-4, 1e-6):
            left = hairpin_barrier(knot - h, 0.0, 1.0, 3)[3]
            right = hairpin_barrier(knot + h, 0.0, 1.0, 3)[3]
            assert abs(left - right) <= 24 * h * (1 + 1e-9)
        h = 1e-4
        d2 = [hairpin_barrier(knot + t, 0.0, 1.0, 2)[2] for t in (-h, 0.0, h)]
        assert abs((d2[1] - d2[0]) / h - (d2[2] - d2[1]) / h) <= 12 * h * (1 + 1e-9)


@pytest.mark.parametrize("name", ALL)
def test_fd_check_at_random_points(name):
    prob = get_problem(name)
    rng = np.random.default_rng(3)
    for x in prob.sample(rng, 20):
        rep = fd_check(prob.evaluate(x), prob.evaluate)
        assert rep.gradient <= 1e-6 and rep.hessian <= 1e-5 and rep.tensor <= 1e-4


@pytest.mark.parametrize("name", ALL)
def test_tensor_slices_exactly_symmetric(name):
    prob = get_problem(name)
    x = prob.sample(np.random.default_rng(1), 1)[0]
    T = prob.evaluate(x).T
    for perm in itertools.permutations(range(3)):
        assert np.array_equal(T, np.transpose(T, perm))


@pytest.mark.parametrize("name", ALL)
def test_bounded_below_on_samples(name):
    prob = get_problem(name)
    xs = prob.sample(np.random.default_rng(5), 10_000)
    assert min(prob.value(x) for x in xs) >= prob.f_low - 1e-9


def test_hairpin_surrogate_is_labelled():
    p = hairpin_surrogate()
    assert p.n == 2 and not p.known_minimizers
    assert "NOT" in hairpin_surrogate.__doc__


def test_quadratic_problem(rng):
    A = rng.normal(size=(3, 3))
    A = A @ A.T + np.eye(3)
    b = rng.normal(size=3)
    p = quadratic(A, b)
    xs = p.known_minimizers[0]
    assert np.allclose(A @ xs, -b)
    assert not np.any(p.evaluate(xs).T)


def test_fd_wrapper():
    ros = rosenbrock(2)
    wrapped = fd_problem_wrapper(ros.fun, 2, (-2.0, 2.0))
    assert wrapped.approximate
    x = np.array([-1.2, 1.0])
    a, b = wrapped.evaluate(x), ros.evaluate(x)
    for got, ref in ((a.g, b.g), (a.H, b.H), (a.T, b.T)):
        assert np.max(np.abs(got - ref)) <= 1e-3 * max(1.0, np.max(np.abs(ref)))
    lin = fd_problem_wrapper(lambda x: 2 * x[0] - x[1] + 4, 2).evaluate(np.array([0.3, 0.4]))
    assert np.max(np.abs(lin.H)) <= 1e-6
    # third differences amplify rounding of f by about 1 / h^3
    noise = np.finfo(float).eps * 5.0 / 1e-4 ** 3
    assert np.max(np.abs(lin.T)) <= noise
    const = fd_problem_wrapper(lambda x: 7.0, 3).evaluate(np.zeros(3))
    assert not np.any(const.g)


def test_registry_lookup():
    assert get_problem("rosenbrock7").n == 7
    assert get_problem("rosenbrock").n == 2
    with pytest.raises(ValueError):
        get_problem("nope")
    with pytest.raises(ValueError):
        rosenbrock(3).evaluate(np.zeros(2))
