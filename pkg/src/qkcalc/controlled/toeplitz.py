"""Banded Toeplitz operators with matrix coefficients and the Toeplitz pairing.

An element acts on l^2(N) (x) C^d as sum_j S_j (x) C_j plus a finite
correction near index 0, where S_j has ones at (i + j, i): S_1 is the
unilateral shift and S_{-1} its adjoint. Compressions to [0, M) are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigvals_banded
from scipy.sparse.linalg import eigsh

from ..errors import WindowTooSmall
from ..linalg import TAU, adjoint
from ..quantk import QkClass, QkWitness
from ..support import max_support_distance

__all__ = ["BandedToeplitz", "ToeplitzPairing", "toeplitz_pair", "z_loop_lift"]


def _shift(M: int, j: int) -> sp.csr_matrix:
    return sp.eye(M, M, k=-j, format="csr", dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class BandedToeplitz:
    """sum_j S_j (x) coeffs[j] + correction; correction is (K d) x (K d)."""

    dim: int
    coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    correction: np.ndarray | None = None

    @property
    def bandwidth(self) -> int:
        return max((abs(j) for j, c in self.coeffs.items() if np.abs(c).max() > TAU), default=0)

    @property
    def correction_size(self) -> int:
        return 0 if self.correction is None else self.correction.shape[0] // self.dim

    def to_sparse(self, M: int) -> sp.csr_matrix:
        """Exact compression to indices [0, M)."""
        d = self.dim
        out = sp.csr_matrix((M * d, M * d), dtype=np.complex128)
        for j, c in self.coeffs.items():
            if abs(j) < M:
                out = out + sp.kron(_shift(M, j), sp.csr_matrix(c), format="csr")
        K = self.correction_size
        if K:
            if K > M:
                raise WindowTooSmall(f"correction of size {K} exceeds window {M}")
            pad = sp.block_diag([sp.csr_matrix(self.correction),
                                 sp.csr_matrix(((M - K) * d, (M - K) * d))], format="csr")
            out = out + pad
        return out.tocsr()

    def adjoint(self) -> BandedToeplitz:
        co = {-j: adjoint(c) for j, c in self.coeffs.items()}
        cor = None if self.correction is None else adjoint(self.correction)
        return BandedToeplitz(self.dim, co, cor)

    def __add__(self, other: BandedToeplitz) -> BandedToeplitz:
        co = dict(self.coeffs)
        for j, c in other.coeffs.items():
            co[j] = co[j] + c if j in co else c
        K = max(self.correction_size, other.correction_size)
        cor = None
        if K:
            cor = np.zeros((K * self.dim,) * 2, dtype=np.complex128)
            for x in (self, other):
                if x.correction is not None:
                    n = x.correction.shape[0]
                    cor[:n, :n] += x.correction
        return BandedToeplitz(self.dim, co, cor)

    def __matmul__(self, other: BandedToeplitz) -> BandedToeplitz:
        # the symbol multiplies; every Hankel defect sits in the first K indices
        co: dict[int, np.ndarray] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                c = a @ b
                co[i + j] = co[i + j] + c if i + j in co else c
        K = max(self.correction_size, other.correction_size) + self.bandwidth + other.bandwidth
        M = K + self.bandwidth + other.bandwidth + 1
        prod = (self.to_sparse(M) @ other.to_sparse(M)).toarray()
        sym = BandedToeplitz(self.dim, co).to_sparse(M).toarray()
        n = K * self.dim
        diff = prod - sym
        cor = diff[:n, :n].copy() if K else None
        rest = diff.copy()
        rest[:n, :n] = 0
        # the last rows of prod are cut by the window, so only compare the top part
        top = (M - self.bandwidth - other.bandwidth) * self.dim
        if np.abs(rest[:top, :top]).max(initial=0.0) > 1e-12 * (1 + np.abs(prod).max()):
            raise AssertionError("correction escaped the corner block")
        return BandedToeplitz(self.dim, co, cor)

    def interior_matches_symbol(self, m: int, N: int) -> bool:
        """Compression to {m..N-1} equals the pure symbol there."""
        full = self.to_sparse(N).toarray()
        sym = BandedToeplitz(self.dim, self.coeffs).to_sparse(N).toarray()
        d = self.dim
        return bool(np.array_equal(full[m * d:, m * d:], sym[m * d:, m * d:]))

    def support_stack(self) -> np.ndarray:
        mats = [c for c in self.coeffs.values()]
        if self.correction is not None:
            d = self.dim
            K = self.correction_size
            blocks = self.correction.reshape(K, d, K, d).transpose(0, 2, 1, 3)
            mats.extend(blocks.reshape(-1, d, d))
        if not mats:
            return np.zeros((1, self.dim, self.dim), dtype=np.complex128)
        return np.ascontiguousarray(np.stack(mats), dtype=np.complex128)


def _e(a: int, b: int) -> np.ndarray:
    m = np.zeros((2, 2))
    m[a, b] = 1.0
    return m


def _corner(dim: int, K: int, diag_block: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(K), diag_block).astype(np.complex128)


def z_loop_lift(q: np.ndarray, k: int, block: int) -> BandedToeplitz:
    """Unitary lift of diag(e^{-2 pi i k t} 1_block, 1, ...) (q e^{2 pi i t} + 1 - q)."""
    s = q.shape[0]
    one = np.eye(s)
    Wq = BandedToeplitz(2 * s, {
        1: np.kron(_e(0, 0), q),
        -1: np.kron(_e(1, 1), q),
        0: np.kron(np.eye(2), one - q),
    }, np.kron(_e(0, 1), q).astype(np.complex128))
    if k == 0:
        return Wq
    e = np.zeros((s, s))
    e[:block, :block] = np.eye(block)
    f = one - e
    j = abs(k)
    if k > 0:
        # T = S*^k, a coisometry: [[T, 0], [1 - T*T, T*]]
        U = BandedToeplitz(2 * s, {-j: np.kron(_e(0, 0), e), j: np.kron(_e(1, 1), e),
                                   0: np.kron(np.eye(2), f)},
                           _corner(2 * s, j, np.kron(_e(1, 0), e)))
    else:
        # T = S^j, an isometry: [[T, 1 - TT*], [0, T*]]
        U = BandedToeplitz(2 * s, {j: np.kron(_e(0, 0), e), -j: np.kron(_e(1, 1), e),
                                   0: np.kron(np.eye(2), f)},
                           _corner(2 * s, j, np.kron(_e(0, 1), e)))
    return U @ Wq


def _banded_lower(a: sp.spmatrix, width: int) -> np.ndarray:
    coo = sp.tril(a).tocoo()
    n = a.shape[0]
    band = np.zeros((width + 1, n), dtype=np.complex128)
    band[coo.row - coo.col, coo.col] = coo.data
    return band


def _band_width(a: sp.spmatrix) -> int:
    coo = a.tocoo()
    return int(np.abs(coo.row - coo.col).max(initial=0))


def _herm_eigvals(a: sp.spmatrix) -> np.ndarray:
    h = 0.5 * (a + a.getH())
    w = _band_width(h)
    return eigvals_banded(_banded_lower(h, w), lower=True)


DENSE_LIMIT = 512


def _herm_norm(a: sp.spmatrix) -> float:
    """Spectral norm of a Hermitian sparse matrix; Lanczos above DENSE_LIMIT."""
    h = 0.5 * (a + a.getH())
    if h.shape[0] <= DENSE_LIMIT:
        return float(np.abs(np.linalg.eigvalsh(h.toarray())).max(initial=0.0))
    if h.nnz == 0:
        return 0.0
    v = eigsh(h, k=1, which="LM", return_eigenvectors=False, tol=1e-12)
    return float(abs(v[0]))


@dataclass(frozen=True)
class ToeplitzPairing:
    """Compressed even representative of the Toeplitz pairing and its invariant."""

    invariant: int
    expected: int
    defect: float
    distance: float
    propagation: float
    epsilon: float
    radius: float
    N: int
    bandwidth: int
    form: str
    representative: sp.csr_matrix = field(repr=False)

    @property
    def c_emp(self) -> float:
        return self.defect / self.epsilon

    @property
    def passes(self) -> bool:
        return (self.defect < 10 * self.epsilon and self.propagation <= 2 * self.radius + 1e-12
                and self.invariant == self.expected)


def _threshold(q: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (q + adjoint(q)))
    return (vecs * (vals > 0.5)) @ adjoint(vecs)


def toeplitz_pair(c: QkClass, N: int = 256, form: str = "right") -> ToeplitzPairing:
    """Pair a z_loop class with the Toeplitz extension.

    ``form="right"`` builds P = W* diag(1,0) W, whose invariant is
    rank kappa0(q) minus k times the block rank; ``form="left"`` builds the
    index-map form W diag(1,0) W*, which has the opposite sign.
    """
    origin = c.origin
    if origin.get("operation") != "z_loop":
        raise ValueError("toeplitz_pair takes a class built by z_loop")
    w: QkWitness = origin["q"]
    k = int(origin["k"])
    alg = w.element.algebra
    q = np.asarray(w.matrix)
    s = q.shape[0]
    block = alg.unit_rank
    bandwidth = max(1, abs(k))
    if N < 32 * bandwidth:
        raise WindowTooSmall(f"window {N} < 32 * bandwidth {bandwidth}")
    W = z_loop_lift(q, k, block)
    D = BandedToeplitz(2 * s, {0: np.kron(_e(0, 0), np.eye(s)).astype(np.complex128)})
    if form == "right":
        P = W.adjoint() @ D @ W
        sign = 1
    elif form == "left":
        P = W @ D @ W.adjoint()
        sign = -1
    else:
        raise ValueError("form must be 'right' or 'left'")
    W0 = z_loop_lift(_threshold(q), k, block)
    R = W0.adjoint() @ D @ W0 if form == "right" else W0 @ D @ W0.adjoint()
    PN = P.to_sparse(N)
    RN = R.to_sparse(N)
    vals = _herm_eigvals(PN)
    defect = float(np.abs(vals * vals - vals).max())
    distance = _herm_norm(PN - RN)
    count = int((vals > 0.5).sum())
    invariant = count - N * s
    rank = int((np.linalg.eigvalsh(0.5 * (q + adjoint(q))) > 0.5).sum())
    expected = sign * (rank - k * block)
    dist = np.tile(alg.index_distances, (2, 2))
    prop = max_support_distance(P.support_stack(), np.ascontiguousarray(dist), TAU)
    return ToeplitzPairing(invariant, expected, defect, distance, prop, w.epsilon, w.radius,
                           N, bandwidth, form, PN)
