"""Multivariate cubic polynomials and the LM-regularized Taylor model.

A cubic is stored by its coefficients ``(c, b, Q, H)`` with

    psi(s) = 1/6 sum_i s_i s^T H_i s + 1/2 s^T Q s + b^T s + c,

which is exactly the third-order Taylor model of ``f`` at ``x_k`` when the
coefficients are ``f, grad f, hess f`` and the third-derivative slices.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tensors import DerivativeBundle, contract, min_eigenvalue, sym_matrix, sym_tensor

Array = np.ndarray


@dataclass(frozen=True)
class CubicPoly:
    c: float
    b: Array
    Q: Array
    H: Array

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        b.setflags(write=False)
        n = b.shape[0]
        Q = sym_matrix(self.Q)
        H = sym_tensor(self.H)
        if Q.shape != (n, n) or H.shape != (n, n, n):
            raise ValueError("inconsistent cubic coefficient shapes")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def _check(self, s) -> Array:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {s.shape}")
        return s

    def eval(self, s) -> float:
        s = self._check(s)
        return (contract(self.H, s, 3) / 6.0 + 0.5 * s @ self.Q @ s
                + self.b @ s + self.c)

    def grad(self, s) -> Array:
        s = self._check(s)
        return 0.5 * contract(self.H, s, 2) + self.Q @ s + self.b

    def hessian(self, s) -> Array:
        s = self._check(s)
        return contract(self.H, s, 1) + self.Q

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.c) and np.all(np.isfinite(self.b))
                    and np.all(np.isfinite(self.Q)) and np.all(np.isfinite(self.H)))

    def scale(self) -> float:
        """Largest coefficient magnitude among ``b``, ``Q`` and ``H``."""
        return float(max(np.max(np.abs(self.b), initial=0.0),
                         np.max(np.abs(self.Q), initial=0.0),
                         np.max(np.abs(self.H), initial=0.0)))


def from_bundle(bundle: DerivativeBundle) -> CubicPoly:
    """Cubic Taylor model of ``f`` at ``bundle.x`` in step coordinates."""
    if bundle.order < 3:
        raise ValueError("the cubic model needs derivatives up to order three")
    return CubicPoly(bundle.f, bundle.g, bundle.H, bundle.T)


def regularize(p: CubicPoly, sigma: float) -> CubicPoly:
    """Add ``sigma * ||s||^2``, i.e. shift ``Q`` by ``2 sigma I``."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return p
    return replace(p, Q=p.Q + 2.0 * sigma * np.eye(p.n))


@dataclass(frozen=True)
class RegularizedModel:
    """``m(x; sigma) = Phi3(x) + sigma ||x - center||^2`` in step coordinates."""

    base: CubicPoly
    sigma: float
    center: Array

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @classmethod
    def at(cls, bundle: DerivativeBundle, sigma: float = 0.0) -> "RegularizedModel":
        return cls(from_bundle(bundle), float(sigma), bundle.x)

    @property
    def poly(self) -> CubicPoly:
        return regularize(self.base, self.sigma)

    def value(self, s) -> float:
        return self.poly.eval(s)


def alpha_lm(bundle: DerivativeBundle) -> float:
    """Regularization level above which the LM model has a local minimizer.

    Uses entrywise gradient magnitudes and the spectral norms of the
    third-derivative slices, minus the negative part of the Hessian spectrum.
    """
    g = np.abs(bundle.g)
    h = np.array([np.max(np.abs(np.linalg.eigvalsh(Ti))) if Ti.size else 0.0
                  for Ti in bundle.T])
    first = np.sqrt(1.5 * (np.linalg.norm(g) * np.linalg.norm(h) + g @ h))
    return float(first - min(0.0, min_eigenvalue(bundle.H)))


def decrease_identity(p: CubicPoly, s_k, H_k, H_bar) -> float:
    """``s^T (H_k / 6 + H_bar / 3) s``.

    Equals ``p(0) - p(s_k)`` whenever ``s_k`` is a stationary point of ``p``,
    with ``H_k`` and ``H_bar`` the Hessians of ``p`` at ``0`` and ``s_k``.
    """
    s = p._check(s_k)
    return float(s @ (np.asarray(H_k) / 6.0 + np.asarray(H_bar) / 3.0) @ s)
