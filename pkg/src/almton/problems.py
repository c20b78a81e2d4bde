"""Test problems with analytic derivatives through order three."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from .tensors import DerivativeBundle

Array = np.ndarray


@dataclass
class Problem:
    """An objective with derivatives, a box of interest and known minimizers.

    ``derivs(x, order)`` returns the value and derivatives up to ``order``
    as ``(f, g, H, T)`` with unused entries set to ``None``.
    """

    name: str
    n: int
    fun: Callable[[Array], float]
    derivs: Callable[[Array, int], tuple]
    lo: Array
    hi: Array
    known_minimizers: list = field(default_factory=list)
    f_low: float = -np.inf
    approximate: bool = False

    def __post_init__(self):
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (self.n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (self.n,)).copy()
        self.known_minimizers = [np.asarray(m, dtype=float) for m in self.known_minimizers]

    def value(self, x) -> float:
        return float(self.fun(np.asarray(x, dtype=float)))

    def evaluate(self, x, order: int = 3) -> DerivativeBundle:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"{self.name}: expected a point of length {self.n}, got {x.shape}")
        f, g, H, T = self.derivs(x, order)
        return DerivativeBundle(x, f, g, H if order >= 2 else None, T if order >= 3 else None)

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.uniform(self.lo, self.hi, size=(size, self.n))


# ---------------------------------------------------------------------------
# Rosenbrock


def _rosen_value(x: Array) -> float:
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _rosen_derivs(x: Array, order: int):
    n = x.shape[0]
    a, b = x[:-1], x[1:]
    r = b - a ** 2
    f = float(np.sum(100.0 * r ** 2 + (1.0 - a) ** 2))
    g = np.zeros(n)
    g[:-1] += -400.0 * a * r - 2.0 * (1.0 - a)
    g[1:] += 200.0 * r
    H = T = None
    if order >= 2:
        H = np.zeros((n, n))
        idx = np.arange(n - 1)
        H[idx, idx] += 1200.0 * a ** 2 - 400.0 * b + 2.0
        H[idx + 1, idx + 1] += 200.0
        H[idx, idx + 1] = H[idx + 1, idx] = -400.0 * a
    if order >= 3:
        T = np.zeros((n, n, n))
        idx = np.arange(n - 1)
        T[idx, idx, idx] += 2400.0 * a
        for p in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
            T[idx + p[0], idx + p[1], idx + p[2]] = -400.0
    return f, g, H, T


def rosenbrock(n: int = 2) -> Problem:
    """Generalized Rosenbrock function; minimizer at all ones."""
    if n < 2:
        raise ValueError("Rosenbrock needs n >= 2")
    return Problem(f"rosenbrock{n}", n, _rosen_value, _rosen_derivs, -2.0, 2.0,
                   [np.ones(n)], 0.0)


# ---------------------------------------------------------------------------
# bivariate polynomials


class _Poly2:
    """Bivariate polynomial ``sum C[i, j] x^i y^j`` with cached derivatives."""

    def __init__(self, coef, value=None):
        self.c = np.asarray(coef, dtype=float)
        self._value = value
        self.d = {}
        for a in range(4):
            for b in range(4 - a):
                c = P.polyder(self.c, a, axis=0) if a else self.c
                self.d[a, b] = P.polyder(c, b, axis=1) if b else c

    def at(self, a: int, b: int, x: Array) -> float:
        return float(P.polyval2d(x[0], x[1], self.d[a, b]))

    def value(self, x: Array) -> float:
        # sums of squares are evaluated factored so f keeps relative accuracy near zero
        return float(self._value(x)) if self._value else self.at(0, 0, x)

    def derivs(self, x: Array, order: int):
        f = self.value(x)
        g = np.array([self.at(1, 0, x), self.at(0, 1, x)])
        H = T = None
        if order >= 2:
            hxy = self.at(1, 1, x)
            H = np.array([[self.at(2, 0, x), hxy], [hxy, self.at(0, 2, x)]])
        if order >= 3:
            T = np.empty((2, 2, 2))
            for i in range(2):
                for j in range(2):
                    for k in range(2):
                        ny = i + j + k
                        T[i, j, k] = self.at(3 - ny, ny, x)
        return f, g, H, T


def _poly_from_terms(terms: dict, value=None) -> _Poly2:
    deg = max(i for i, _ in terms) + 1, max(j for _, j in terms) + 1
    c = np.zeros(deg)
    for (i, j), v in terms.items():
        c[i, j] += v
    return _Poly2(c, value)


def _expand_square(terms: dict) -> dict:
    """Coefficients of ``(sum terms)^2``."""
    out: dict = {}
    for (i1, j1), a in terms.items():
        for (i2, j2), b in terms.items():
            key = (i1 + i2, j1 + j2)
            out[key] = out.get(key, 0.0) + a * b
    return out


def _sum_terms(*parts: dict) -> dict:
    out: dict = {}
    for part in parts:
        for k, v in part.items():
            out[k] = out.get(k, 0.0) + v
    return out


def _poly_problem(name, poly, lo, hi, minimizers, f_low) -> Problem:
    return Problem(name, 2, poly.value, poly.derivs, lo, hi, minimizers, f_low)


def himmelblau() -> Problem:
    poly = _poly_from_terms(_sum_terms(
        _expand_square({(2, 0): 1.0, (0, 1): 1.0, (0, 0): -11.0}),
        _expand_square({(1, 0): 1.0, (0, 2): 1.0, (0, 0): -7.0})),
        lambda x: (x[0] ** 2 + x[1] - 11.0) ** 2 + (x[0] + x[1] ** 2 - 7.0) ** 2)
    mins = [(3.0, 2.0), (-2.805118086952745, 3.131312518250573),
            (-3.779310253377747, -3.2831859912861696), (3.5844283403304917, -1.8481265269644036)]
    return _poly_problem("himmelblau", poly, -5.0, 5.0, mins, 0.0)


def three_hump_camel() -> Problem:
    poly = _poly_from_terms({(2, 0): 2.0, (4, 0): -1.05, (6, 0): 1.0 / 6.0,
                             (1, 1): 1.0, (0, 2): 1.0})
    mins = [(0.0, 0.0), (1.747552345830289, -0.8737761729151445),
            (-1.747552345830289, 0.8737761729151445)]
    return _poly_problem("camel3", poly, -2.0, 2.0, mins, 0.0)


def styblinski_tang() -> Problem:
    poly = _poly_from_terms({(4, 0): 0.5, (2, 0): -8.0, (1, 0): 2.5,
                             (0, 4): 0.5, (0, 2): -8.0, (0, 1): 2.5})
    lo_root, hi_root = -2.903534027771177, 2.746802770990837
    mins = [(a, b) for a in (lo_root, hi_root) for b in (lo_root, hi_root)]
    return _poly_problem("styblinski_tang", poly, -5.0, 5.0, mins, -78.33233140754285)


def two_well() -> Problem:
    """``(x^2 - 1)^2 + (y - x^2)^2``: two minima joined through a saddle."""
    poly = _poly_from_terms(_sum_terms(
        _expand_square({(2, 0): 1.0, (0, 0): -1.0}),
        _expand_square({(0, 1): 1.0, (2, 0): -1.0})),
        lambda x: (x[0] ** 2 - 1.0) ** 2 + (x[1] - x[0] ** 2) ** 2)
    return _poly_problem("two_well", poly, -2.0, 2.0, [(1.0, 1.0), (-1.0, 1.0)], 0.0)


def classic_2d_suite() -> list[Problem]:
    return [himmelblau(), three_hump_camel(), styblinski_tang(), two_well()]


# ---------------------------------------------------------------------------
# hairpin pieces


def hairpin_barrier(x: float, xmin: float, xmax: float, order: int = 0):
    """Quartic wall outside ``(xmin, xmax)``; returns ``order + 1`` derivatives.

    The pieces ``(x - xmin)^4`` and ``(x - xmax)^4`` meet the flat interior
    with matching derivatives up to order three.
    """
    if not xmin < xmax:
        raise ValueError("need xmin < xmax")
    d = min(x - xmin, 0.0) + max(x - xmax, 0.0)
    vals = (d ** 4, 4.0 * d ** 3, 12.0 * d ** 2, 24.0 * d)
    return vals[0] if order == 0 else vals[: order + 1]


HAIRPIN_SLOPE = 3e-4


def hairpin_surrogate() -> Problem:
    """Hairpin-like landscape built from the published barrier and slope terms.

    This is NOT the published hairpin objective: its core interpolants are
    only described in words, so the core here is a stand-in with the same
    ingredients, ``g(x, y) = h2(x) (w(x) + (1 - w(x)) u(y))`` with
    ``u(y) = 2 / (1 + e^y)``, ``w(x) = (4x^2 - 1)^2 / 9`` and
    ``h2(x) = 1 + x^2``.
    """
    h2 = np.array([1.0, 0.0, 1.0])
    w = P.polymul([-1.0, 0.0, 4.0], [-1.0, 0.0, 4.0]) / 9.0
    A = P.polymul(h2, w)                 # h2 * w
    B = P.polysub(h2, A)                 # h2 * (1 - w)
    Ad = [P.polyder(A, k) if k else A for k in range(4)]
    Bd = [P.polyder(B, k) if k else B for k in range(4)]

    def u_derivs(y):
        t = np.tanh(0.5 * y)
        s = 1.0 - t * t
        return (1.0 - t, -0.5 * s, 0.5 * t * s, 0.25 * s * (1.0 - 3.0 * t * t))

    def derivs(p: Array, order: int):
        x, y = float(p[0]), float(p[1])
        u = u_derivs(y)
        a = [P.polyval(x, c) for c in Ad]
        b = [P.polyval(x, c) for c in Bd]
        bx = hairpin_barrier(x, -0.4, 0.5, 3)
        by = hairpin_barrier(y, 0.0, 5.0, 3)

        def D(i, j):
            # d^i/dx^i d^j/dy^j of g + r x + 50 b(x) + 50 b(y)
            val = (a[i] if j == 0 else 0.0) + b[i] * u[j]
            if j == 0:
                val += 50.0 * bx[i] + (HAIRPIN_SLOPE * x if i == 0 else HAIRPIN_SLOPE if i == 1 else 0.0)
            if i == 0:
                val += 50.0 * by[j]
            return val

        f = D(0, 0)
        g = np.array([D(1, 0), D(0, 1)])
        H = T = None
        if order >= 2:
            H = np.array([[D(2, 0), D(1, 1)], [D(1, 1), D(0, 2)]])
        if order >= 3:
            T = np.empty((2, 2, 2))
            for i in range(2):
                for j in range(2):
                    for k in range(2):
                        ny = i + j + k
                        T[i, j, k] = D(3 - ny, ny)
        return f, g, H, T

    return Problem("hairpin_surrogate", 2, lambda p: derivs(p, 0)[0], derivs,
                   (-1.0, -1.0), (1.0, 6.0), [], -HAIRPIN_SLOPE)


# ---------------------------------------------------------------------------
# quadratics


def quadratic(A, b=None, c: float = 0.0, name: str = "quadratic", box: float = 10.0) -> Problem:
    """``1/2 x^T A x + b^T x + c``; zero third derivative."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)

    def fun(x):
        return float(0.5 * x @ A @ x + b @ x + c)

    def derivs(x: Array, order: int):
        return (fun(x), A @ x + b, A.copy() if order >= 2 else None,
                np.zeros((n, n, n)) if order >= 3 else None)

    minimizers, f_low = [], -np.inf
    if np.linalg.eigvalsh(A)[0] > 0:
        xs = np.linalg.solve(A, -b)
        minimizers, f_low = [xs], fun(xs)
    return Problem(name, n, fun, derivs, -box, box, minimizers, f_low)


# ---------------------------------------------------------------------------
# finite-difference wrapper


def fd_problem_wrapper(f_eval: Callable[[Array], float], n: int, domain=(-1.0, 1.0),
                       name: str = "fd", h1: float = 1e-6, h2: float = 1e-4,
                       h3: float = 1e-4) -> Problem:
    """Problem whose derivatives are central differences of ``f_eval``."""

    def fun(x):
        return float(f_eval(np.asarray(x, dtype=float)))

    eye = np.eye(n)

    def derivs(x: Array, order: int):
        f = fun(x)
        g = np.array([(fun(x + h1 * e) - fun(x - h1 * e)) / (2 * h1) for e in eye])
        H = T = None
        if order >= 2:
            H = np.empty((n, n))
            for i in range(n):
                for j in range(i, n):
                    di, dj = h2 * eye[i], h2 * eye[j]
                    H[i, j] = H[j, i] = (fun(x + di + dj) - fun(x + di - dj)
                                         - fun(x - di + dj) + fun(x - di - dj)) / (4 * h2 * h2)
        if order >= 3:
            T = np.empty((n, n, n))
            signs = [(a, b, c) for a in (1, -1) for b in (1, -1) for c in (1, -1)]
            for i in range(n):
                for j in range(i, n):
                    for k in range(j, n):
                        acc = sum(a * b * c * fun(x + h3 * (a * eye[i] + b * eye[j] + c * eye[k]))
                                  for a, b, c in signs)
                        v = acc / (8 * h3 ** 3)
                        for p in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                            T[p] = v
        return f, g, H, T

    lo, hi = domain
    return Problem(name, n, fun, derivs, lo, hi, [], -np.inf, approximate=True)


REGISTRY: dict[str, Callable[[], Problem]] = {
    "himmelblau": himmelblau,
    "camel3": three_hump_camel,
    "styblinski_tang": styblinski_tang,
    "two_well": two_well,
    "hairpin_surrogate": hairpin_surrogate,
}


def get_problem(name: str) -> Problem:
    """Look up a problem by name; ``rosenbrockN`` builds the N-dimensional one."""
    if name.startswith("rosenbrock"):
        suffix = name[len("rosenbrock"):]
        return rosenbrock(int(suffix) if suffix else 2)
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(REGISTRY)} and rosenbrockN")
