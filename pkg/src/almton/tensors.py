"""Dense symmetric tensors up to order three.

Matrices are plain ``(n, n)`` arrays and third-order tensors are ``(n, n, n)``
arrays whose ``i``-th slice ``T[i]`` is the Hessian of the ``i``-th partial
derivative.  Constructors symmetrize and freeze their inputs so the objects
can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Callable

import numpy as np

Array = np.ndarray


def _frozen(a: Array) -> Array:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sym_matrix(a) -> Array:
    """Return the symmetric part of ``a`` as a read-only array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return _frozen(0.5 * (a + a.T))


def sym_tensor(t) -> Array:
    """Average ``t`` over all six index permutations (read-only result)."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or not (t.shape[0] == t.shape[1] == t.shape[2]):
        raise ValueError(f"expected an (n, n, n) tensor, got shape {t.shape}")
    acc = np.zeros_like(t)
    for perm in permutations(range(3)):
        acc += np.transpose(t, perm)
    return _frozen(acc / 6.0)


def contract(T: Array, s: Array, times: int):
    """Contract a third-order tensor with ``s`` one, two or three times.

    ``times=1`` gives the matrix ``sum_i s_i T_i``, ``times=2`` the vector
    with entries ``s^T T_i s`` and ``times=3`` the scalar
    ``sum_i s_i s^T T_i s``.
    """
    T = np.asarray(T, dtype=float)
    s = np.asarray(s, dtype=float)
    if T.ndim != 3 or s.shape != (T.shape[0],):
        raise ValueError(f"dimension mismatch: tensor {T.shape}, vector {s.shape}")
    if times == 1:
        return np.einsum("i,ijk->jk", s, T)
    if times == 2:
        return np.einsum("ijk,j,k->i", T, s, s)
    if times == 3:
        return float(np.einsum("ijk,i,j,k->", T, s, s, s))
    raise ValueError("times must be 1, 2 or 3")


def _check_finite(a: Array) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")


def min_eigenvalue(A: Array) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    _check_finite(A)
    if A.size == 0:
        raise ValueError("empty matrix")
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def operator_norm(T: Array) -> float:
    """Induced operator norm of a vector or matrix, upper bound for order three.

    For order-3 tensors the exact norm is intractable in general; the value
    returned is the smallest spectral norm among the three ``n x n^2``
    unfoldings, which is always at least the true norm.
    """
    T = np.asarray(T, dtype=float)
    _check_finite(T)
    if T.ndim == 1:
        return float(np.linalg.norm(T))
    if T.ndim == 2:
        return float(np.linalg.norm(T, 2)) if T.size else 0.0
    if T.ndim == 3:
        n = T.shape[0]
        if n == 0:
            return 0.0
        bounds = [np.linalg.norm(np.moveaxis(T, ax, 0).reshape(n, -1), 2) for ax in range(3)]
        return float(min(bounds))
    raise ValueError(f"unsupported tensor order {T.ndim}")


@dataclass(frozen=True)
class DerivativeBundle:
    """Value and derivatives of ``f`` at ``x``.

    ``H`` and ``T`` are optional so first- and second-order methods can skip
    the work; ALMTON needs all of them.
    """

    x: Array
    f: float
    g: Array
    H: Array | None = None
    T: Array | None = None

    def __post_init__(self):
        x = _frozen(np.atleast_1d(self.x))
        n = x.shape[0]
        g = _frozen(self.g)
        if g.shape != (n,):
            raise ValueError(f"gradient shape {g.shape} does not match n={n}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", float(self.f))
        object.__setattr__(self, "g", g)
        if self.H is not None:
            H = sym_matrix(self.H)
            if H.shape != (n, n):
                raise ValueError(f"Hessian shape {H.shape} does not match n={n}")
            object.__setattr__(self, "H", H)
        if self.T is not None:
            T = sym_tensor(self.T)
            if T.shape != (n, n, n):
                raise ValueError(f"tensor shape {T.shape} does not match n={n}")
            object.__setattr__(self, "T", T)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def order(self) -> int:
        if self.T is not None:
            return 3
        return 2 if self.H is not None else 1


@dataclass(frozen=True)
class FDReport:
    gradient: float
    hessian: float
    tensor: float

    def worst(self) -> float:
        return max(self.gradient, self.hessian, self.tensor)


def _rel_err(approx: Array, exact: Array) -> float:
    scale = max(1.0, float(np.max(np.abs(exact))) if exact.size else 0.0)
    return float(np.max(np.abs(approx - exact))) / scale


def fd_check(bundle: DerivativeBundle, f_eval: Callable[[Array], DerivativeBundle],
             h: float = 1e-5) -> FDReport:
    """Compare ``bundle`` against central differences built from ``f_eval``.

    The gradient is differenced from values, the Hessian from gradients and
    the tensor from Hessians, each returned by ``f_eval`` at shifted points.
    Errors are ``max |approx - exact| / max(1, max |exact|)`` per order.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(bundle.x, dtype=float)
    n = x.shape[0]
    g_fd = np.empty(n)
    H_fd = np.empty((n, n))
    T_fd = np.empty((n, n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        plus, minus = f_eval(x + e), f_eval(x - e)
        g_fd[i] = (plus.f - minus.f) / (2 * h)
        H_fd[i] = (plus.g - minus.g) / (2 * h)
        if bundle.T is not None:
            T_fd[i] = (plus.H - minus.H) / (2 * h)
    gerr = _rel_err(g_fd, bundle.g)
    herr = _rel_err(0.5 * (H_fd + H_fd.T), bundle.H) if bundle.H is not None else 0.0
    terr = _rel_err(T_fd, bundle.T) if bundle.T is not None else 0.0
    return FDReport(gerr, herr, terr)
