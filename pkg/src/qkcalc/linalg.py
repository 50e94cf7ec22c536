"""Dense complex linear algebra and truncated power series.

Every function accepts either a single square matrix or a stack of them
(leading axes are sample axes). Arrays are never modified in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotSelfAdjoint

__all__ = [
    "TAU",
    "HermitianSpectrum",
    "adjoint",
    "as_cmatrix",
    "identity_like",
    "op_norm",
    "herm_eig",
    "trunc_poly",
    "trunc_exp",
    "exp_tail",
    "series_cutoff_exp",
    "invsqrt_coeffs",
    "invsqrt_tail",
    "series_cutoff_invsqrt",
    "lift_tails",
    "series_cutoff_lift",
]

TAU = 1e-14
"""Entries with modulus at or below this count as zero for support decisions."""

SELF_ADJOINT_TOL = 1e-12


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix (stack), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def identity_like(m: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(m.shape[-1], dtype=np.complex128), m.shape).copy()


def op_norm(m) -> float:
    """Largest singular value; for a stack, the maximum over all samples."""
    a = np.asarray(m)
    if a.size == 0:
        return 0.0
    if a.ndim == 2:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    return float(np.linalg.svd(a, compute_uv=False)[..., 0].max())


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ adjoint(u)

    def apply(self, f) -> np.ndarray:
        """Spectral calculus: U f(diag) U*."""
        u = self.eigenvectors
        return (u * f(self.eigenvalues)) @ adjoint(u)


def herm_eig(m) -> HermitianSpectrum:
    a = as_cmatrix(m)
    if a.ndim != 2:
        raise ValueError("herm_eig takes a single matrix")
    defect = op_norm(a - adjoint(a))
    if defect > SELF_ADJOINT_TOL * (1.0 + op_norm(a)):
        raise NotSelfAdjoint(defect)
    vals, vecs = np.linalg.eigh(0.5 * (a + adjoint(a)))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return HermitianSpectrum(vals, vecs)


def trunc_poly(m, coeffs) -> np.ndarray:
    """Evaluate sum_k coeffs[k] m^k by Horner's rule."""
    a = np.asarray(m, dtype=np.complex128)
    eye = np.eye(a.shape[-1], dtype=np.complex128)
    out = np.broadcast_to(coeffs[-1] * eye, a.shape).astype(np.complex128)
    for c in reversed(coeffs[:-1]):
        out = a @ out
        if c != 0:
            out = out + c * eye
    return out


def trunc_exp(m, L: int) -> np.ndarray:
    """Sum_{l=0}^{L} m^l / l!."""
    if L < 0:
        raise ValueError("L must be >= 0")
    a = np.asarray(m, dtype=np.complex128)
    eye = np.eye(a.shape[-1], dtype=np.complex128)
    out = np.broadcast_to(eye, a.shape).astype(np.complex128)
    for l in range(L, 0, -1):
        out = eye + (a @ out) / l
    return out


def _suffix_sums(terms: list[float]) -> list[float]:
    # suffix[i] = sum(terms[i:]) summed smallest-first
    out = [0.0] * (len(terms) + 1)
    acc = 0.0
    for i in range(len(terms) - 1, -1, -1):
        acc += terms[i]
        out[i] = acc
    return out


@lru_cache(maxsize=None)
def _exp10_suffix(nterms: int = 200) -> tuple[float, ...]:
    terms = []
    t = 1.0
    for l in range(nterms):
        if l > 0:
            t *= 10.0 / l
        terms.append(t)
    return tuple(_suffix_sums(terms))


def exp_tail(L: int) -> float:
    """Sum_{l > L} 10^l / l! (200-term summation)."""
    return _exp10_suffix()[L + 1]


def series_cutoff_exp(eps: float) -> int:
    """Smallest L with sum_{l>L} 10^l/l! < eps."""
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    L = 0
    while exp_tail(L) >= eps:
        L += 1
    return L


def invsqrt_coeffs(n: int) -> np.ndarray:
    """First n+1 coefficients of (1+t)^(-1/2) = sum_k binom(-1/2, k) t^k."""
    a = np.empty(n + 1)
    a[0] = 1.0
    for k in range(1, n + 1):
        a[k] = a[k - 1] * (-0.5 - (k - 1)) / k
    return a


@lru_cache(maxsize=None)
def _invsqrt_suffix(nterms: int = 500) -> tuple[float, ...]:
    a = invsqrt_coeffs(nterms - 1)
    return tuple(_suffix_sums([abs(a[k]) / 2.0**k for k in range(nterms)]))


def invsqrt_tail(n: int) -> float:
    """Sum_{k >= n} |a_k| / 2^k."""
    return _invsqrt_suffix()[n]


def series_cutoff_invsqrt(eps: float) -> int:
    """Smallest n with sum_{k>=n} |a_k|/2^k <= eps."""
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    n = 0
    while invsqrt_tail(n) > eps:
        n += 1
    return n


@lru_cache(maxsize=None)
def _lift_suffixes(nterms: int = 200) -> tuple[tuple[float, ...], tuple[float, ...]]:
    log_terms = [0.0] + [2.0**-k / k for k in range(1, nterms)]
    ln2 = math.log(2.0)
    exp_terms = []
    t = 1.0
    for k in range(nterms):
        if k > 0:
            t *= ln2 / k
        exp_terms.append(t)
    return tuple(_suffix_sums(log_terms)), tuple(_suffix_sums(exp_terms))


def lift_tails(L: int) -> tuple[float, float]:
    """(sum_{k>L} 2^-k/k, sum_{k>L} log(2)^k/k!)."""
    log_s, exp_s = _lift_suffixes()
    return log_s[L + 1], exp_s[L + 1]


def series_cutoff_lift(eps: float) -> int:
    """Smallest L for which both truncated log and exp tails are < eps."""
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    L = 1
    while max(lift_tails(L)) >= eps:
        L += 1
    return L
