"""Semi-split filtered extensions: the cone extension and its mapping cone."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..algebra import (
    FilteredElement,
    MatrixAlgebra,
    amplify_algebra,
    element,
    matrix_algebra,
    path_algebra,
    unitization,
)
from ..errors import AlgebraMismatch, UnsupportedAlgebra
from ..linalg import TAU
from ..quantk import QkClass, check_witness

__all__ = [
    "SemisplitExtension",
    "make_cone_extension",
    "embed_unital_class",
    "MappingCone",
    "make_mapping_cone",
    "linear_profile",
]

Profile = Callable[[np.ndarray], np.ndarray]


def linear_profile(t: np.ndarray) -> np.ndarray:
    return t


@dataclass(frozen=True, eq=False)
class SemisplitExtension:
    """0 -> J -> T -> Q -> 0 over a base algebra B, realized as paths.

    ``total`` is the unitized cone over B, ``ideal`` the suspension of B and
    ``quotient`` either B with an extra scalar index (B unital) or the face
    unitization of B. The section is s(y)(t) = (1 - phi(t)) z (x) 1 + phi(t) y
    for the scalar part z of y; it is filtered, unital and linear.
    """

    base: MatrixAlgebra
    total: MatrixAlgebra
    ideal: MatrixAlgebra
    ideal_unitized: MatrixAlgebra
    quotient: MatrixAlgebra
    N: int
    profile: Profile = field(default=linear_profile, repr=False)

    @property
    def block(self) -> int:
        return self.base.size

    def _amp(self, alg: MatrixAlgebra, n: int) -> MatrixAlgebra:
        return amplify_algebra(alg, n)

    def _matrix_degree(self, x: FilteredElement, alg: MatrixAlgebra) -> int:
        step = alg.size
        n, rem = divmod(x.algebra.size, step)
        if rem or n < 1 or x.algebra != self._amp(alg, n):
            raise AlgebraMismatch(f"element is not over M_n({alg.kind})")
        return n

    def degree(self, x: FilteredElement) -> int:
        """n such that x lives over M_n of the total algebra or of the ideal."""
        for alg in (self.total, self.ideal_unitized, self.ideal):
            try:
                return self._matrix_degree(x, alg)
            except AlgebraMismatch:
                continue
        raise AlgebraMismatch("element belongs to none of the extension algebras")

    def quotient_degree(self, y: FilteredElement) -> int:
        return self._matrix_degree(y, self.quotient)

    def total_n(self, n: int) -> MatrixAlgebra:
        return self._amp(self.total, n)

    def ideal_n(self, n: int) -> MatrixAlgebra:
        return self._amp(self.ideal_unitized, n)

    def quotient_n(self, n: int) -> MatrixAlgebra:
        return self._amp(self.quotient, n)

    # maps ----------------------------------------------------------------
    def q_payload(self, x: np.ndarray, n: int) -> np.ndarray:
        """Evaluation at t = 1, joined with the scalar part in extra mode."""
        end = x[-1]
        if self.quotient.scalar_mode == "face":
            return end.copy()
        m = self.block
        z = x[0][..., ::m, ::m]
        out = np.zeros(end.shape[:-2] + (n, m + 1, n, m + 1), dtype=np.complex128)
        out[..., :, :m, :, :m] = end.reshape(end.shape[:-2] + (n, m, n, m))
        out[..., :, m, :, m] = z
        return out.reshape(end.shape[:-2] + (n * (m + 1),) * 2)

    def q(self, x: FilteredElement) -> FilteredElement:
        n = self.degree(x)
        return element(self.quotient_n(n), self.q_payload(x.payload, n), validate=False)

    def s_payload(self, y: np.ndarray, n: int) -> np.ndarray:
        qa = self.quotient_n(n)
        z = qa.scalar_part(y)
        core = y if qa.scalar_mode == "face" else qa.core_part(y)
        flat = np.kron(z, np.eye(qa.scalar_block if qa.scalar_mode == "face" else self.block))
        t = np.asarray(self.profile(self.total.sample_times[0]), dtype=float)
        t = t.reshape((-1,) + (1,) * core.ndim)
        return (1.0 - t) * flat[None] + t * core[None]

    def s(self, y: FilteredElement) -> FilteredElement:
        n = self.quotient_degree(y)
        return element(self.total_n(n), self.s_payload(y.payload, n), validate=False)

    def inclusion(self, x: FilteredElement) -> FilteredElement:
        n = self._ideal_degree(x)
        return element(self.total_n(n), x.payload, validate=False)

    def to_ideal(self, x: FilteredElement, validate: bool = True) -> FilteredElement:
        """Read an element of the total algebra with t=1 scalar face as an ideal element."""
        n = self._matrix_degree(x, self.total)
        return element(self.ideal_n(n), x.payload, validate=validate)

    def _ideal_degree(self, x: FilteredElement) -> int:
        for alg in (self.ideal_unitized, self.ideal):
            try:
                return self._matrix_degree(x, alg)
            except AlgebraMismatch:
                continue
        raise AlgebraMismatch("element is not in the ideal")

    def with_profile(self, profile: Profile) -> SemisplitExtension:
        t = np.linspace(0.0, 1.0, 11)
        v = np.asarray(profile(t), dtype=float)
        if abs(v[0]) > TAU or abs(v[-1] - 1.0) > TAU or v.min() < -TAU or v.max() > 1 + TAU:
            raise ValueError("profile must map [0,1] into [0,1] with 0 -> 0 and 1 -> 1")
        return SemisplitExtension(self.base, self.total, self.ideal, self.ideal_unitized,
                                  self.quotient, self.N, profile)

    def describe(self) -> dict:
        return {"kind": "cone-extension", "base": self.base.describe(), "N": self.N}


def _unital_base(A: MatrixAlgebra) -> MatrixAlgebra:
    # rank offsets count the unit of the innermost algebra, so M_n(B) is built over B
    while A.kind == "amplification-of" and A.inner is not None and not A.grid:
        A = A.inner
    if A.kind == "scalar-matrix" and A.size > A.unit_rank:
        return matrix_algebra(A.unit_rank)
    return A


def make_cone_extension(A: MatrixAlgebra, N: int = 256,
                        profile: Profile = linear_profile) -> SemisplitExtension:
    """Cone extension 0 -> SB -> CB -> B -> 0, unitized so every map is unital.

    A may be unital (then the quotient is A + C in extra form; an
    amplification M_n(B), including M_n(C), is built over B so rank offsets
    count the unit of B), a path
    algebra vanishing somewhere (quotient its face unitization), or such a
    face unitization itself (used as the quotient directly).
    """
    if A.scalar_mode == "extra":
        raise ValueError("pass the unital algebra itself, not its extra-index unitization")
    if A.scalar_mode == "face":
        base, quotient = A.inner, A
    else:
        base = _unital_base(A)
        quotient = unitization(base)
    cone = path_algebra(base, N, (True, False))
    ideal = path_algebra(base, N, (True, True))
    ext = SemisplitExtension(base, unitization(cone), ideal, unitization(ideal),
                             quotient, N, linear_profile)
    return ext if profile is linear_profile else ext.with_profile(profile)


def embed_unital_class(ext: SemisplitExtension, c: QkClass) -> QkClass:
    """[p, l] over M_n(A), A unital, as [diag(p, (1~ - 1_A) (x) I_l), l] over A + C."""
    if ext.quotient.scalar_mode != "extra":
        raise ValueError("only needed when the quotient uses the extra-index form")
    if c.parity != "even":
        raise ValueError("embedding is for even classes")
    p = c.representative.matrix
    m = ext.block
    n, rem = divmod(p.shape[-1], m)
    if rem or p.ndim != 2:
        raise AlgebraMismatch("class is not over M_n of the base algebra")
    l = c.rank_offset
    k = n + l
    out = np.zeros((k, m + 1, k, m + 1), dtype=np.complex128)
    out[:n, :m, :n, :m] = p.reshape(n, m, n, m)
    for i in range(n, k):
        out[i, m, i, m] = 1.0
    alg = ext.quotient_n(k)
    w = c.representative
    wit = check_witness(element(alg, out.reshape(alg.size, alg.size)), "projection",
                        w.epsilon, w.radius)
    return QkClass("even", wit, l, {"embedded_from": c.origin})


# ---------------------------------------------------------------------------
# mapping cone


@dataclass(frozen=True, eq=False)
class MappingCone:
    """C_q = {(x, f) : x in T, f a path in Q on [0,1) with f(0) = q(x)}.

    The path axis of f uses the grid of the extension and vanishes at t=1.
    """

    ext: SemisplitExtension
    n: int = 1

    def __post_init__(self):
        if self.ext.quotient.scalar_mode != "extra":
            raise UnsupportedAlgebra("mapping cone needs a quotient in extra-index form")

    @property
    def path(self) -> MatrixAlgebra:
        return path_algebra(self.ext.quotient_n(self.n), self.ext.N, (False, True))

    @property
    def total(self) -> MatrixAlgebra:
        return self.ext.total_n(self.n)

    def pair(self, x: np.ndarray, f: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.complex128)
        f = np.asarray(f, dtype=np.complex128)
        if x.shape != self.total.shape or f.shape != self.path.shape:
            raise ValueError("component shapes do not match the mapping cone")
        if check:
            self.path.validate(f)
            qx = self.ext.q_payload(x, self.n)
            scale = 1.0 + float(np.abs(qx).max(initial=0.0))
            if np.abs(f[0] - qx).max(initial=0.0) > 1e-10 * scale:
                raise ValueError("matching condition f(0) = q(x) fails")
        return x, f

    def e_q(self, x: FilteredElement) -> tuple[np.ndarray, np.ndarray]:
        """(x, 0) for x in the ideal."""
        inc = self.ext.inclusion(x)
        return self.pair(inc.payload, self.path.zero())

    def phi_q(self, f: FilteredElement) -> tuple[np.ndarray, np.ndarray]:
        """(0, f) for f a path in Q on (0, 1)."""
        return self.pair(self.total.zero(), f.payload)

    def mul(self, a, b):
        return a[0] @ b[0], a[1] @ b[1]

    def adj(self, a):
        return tuple(np.conj(np.swapaxes(c, -1, -2)) for c in a)

    def propagation(self, a) -> float:
        return max(self.total.propagation(a[0]), self.path.propagation(a[1]))


def make_mapping_cone(ext: SemisplitExtension, n: int = 1) -> MappingCone:
    return MappingCone(ext, n)
