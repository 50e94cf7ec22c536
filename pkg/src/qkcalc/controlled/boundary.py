"""Controlled boundary maps of a cone extension and the loops they compare to.

Every construction returns its measured output parameters next to the
result, so pipelines can combine them through ``ControlPair``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..algebra import FilteredElement, MatrixAlgebra, element, path_algebra, unitization
from ..errors import AlgebraMismatch, DefectTooLarge, PathTooCoarse, UnsupportedAlgebra
from ..linalg import adjoint, op_norm, series_cutoff_exp, series_cutoff_lift, trunc_exp, trunc_poly
from ..quantk import (
    QkClass,
    SampledHomotopy,
    check_witness,
    inverse_homotopy,
    k0_invariant,
    k1_loop_invariant,
    projection_defects,
    unitary_defects,
)
from .extensions import SemisplitExtension, embed_unital_class

__all__ = [
    "LiftResult",
    "BoundaryResult",
    "unitary_lift",
    "boundary_even",
    "boundary_odd",
    "z_loop",
    "exactness_probe",
    "regrid",
    "to_quotient_class",
    "LIFT_STEP",
]

LIFT_STEP = 1 / 8
"""Partition points of a lifted path must be closer than this in norm."""


def regrid(ext: SemisplitExtension, N: int) -> SemisplitExtension:
    """The same extension sampled with N intervals on the cone axis."""
    cone = path_algebra(ext.base, N, (True, False))
    ideal = path_algebra(ext.base, N, (True, True))
    return SemisplitExtension(ext.base, unitization(cone), ideal, unitization(ideal),
                              ext.quotient, N, ext.profile)


def _snap_ends(ext: SemisplitExtension, x: np.ndarray, ends=(0, -1)) -> np.ndarray:
    """Set cone-axis faces exactly to the t=0 scalar; removes rounding only."""
    m = ext.total.scalar_block
    z = x[0][..., ::m, ::m]
    face = np.kron(z, np.eye(m)) if z.ndim == 2 else np.stack([np.kron(zz, np.eye(m)) for zz in z])
    out = x.copy()
    for e in ends:
        out[e] = face
    return out


@dataclass(frozen=True)
class LiftResult:
    lift: FilteredElement
    quotient_error: float
    partition: tuple[int, ...]
    cutoff: int
    propagation: float
    propagation_bound: float

    @property
    def pieces(self) -> int:
        return len(self.partition) - 1


@dataclass(frozen=True)
class BoundaryResult:
    """Boundary class with the quantities measured while building it."""

    cls: QkClass
    eps_in: float
    r_in: float
    eps_out: float
    propagation: float
    defect: float
    check_value: float | None = None
    cutoff: int | None = None
    lift: LiftResult | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def alpha_emp(self) -> float:
        return self.eps_out / self.eps_in

    @property
    def k_emp(self) -> float:
        return self.propagation / self.r_in if self.r_in > 0 else 0.0


def _greedy_partition(samples: np.ndarray) -> tuple[int, ...]:
    N = samples.shape[0] - 1
    if N == 0:
        return (0,)
    step = np.linalg.svd(np.diff(samples, axis=0), compute_uv=False)[..., 0]
    step = step.reshape(N, -1).max(axis=1)
    if np.any(step >= LIFT_STEP):
        raise PathTooCoarse(f"consecutive samples up to {step.max():.3f} apart")
    cuts = [0]
    a = 0
    while a < N:
        b = a + 1
        while b < N and op_norm(samples[b + 1] - samples[a]) < LIFT_STEP:
            b += 1
        cuts.append(b)
        a = b
    return tuple(cuts)


def unitary_lift(ext: SemisplitExtension, V: SampledHomotopy, eps: float | None = None,
                 r: float | None = None) -> LiftResult:
    """Lift a path of almost unitaries in the quotient ending at 1.

    W = W_1 ... W_p with W_i = P(s(Q(1 - V_{i-1} V_i*))), P and Q the
    truncated exponential and logarithm at the lift cutoff. q(W) is close to
    V(0) and W is joined to 1 by scaling the logarithms.
    """
    eps = V.epsilon if eps is None else eps
    r = V.radius if r is None else r
    alg = V.algebra
    n = ext.quotient_degree(element(alg, V.samples[0], validate=False))
    xs = V.samples
    one = alg.unit()
    if op_norm(xs[-1] - one) > 1e-9:
        raise ValueError("path must end at the identity")
    cuts = _greedy_partition(xs)
    L = series_cutoff_lift(min(eps, 0.2499))
    log_coeffs = [0.0] + [-1.0 / k for k in range(1, L + 1)]
    total = ext.total_n(n)
    W = total.unit()
    for a, b in zip(cuts[:-1], cuts[1:]):
        x = one - xs[a] @ adjoint(xs[b])
        lx = trunc_poly(x, log_coeffs)
        W = W @ trunc_exp(ext.s_payload(lx, n), L)
    W = _snap_ends(ext, W, ends=(0,))
    lift = element(total, W, validate=False)
    err = op_norm(ext.q_payload(W, n) - xs[0])
    pieces = len(cuts) - 1
    return LiftResult(lift, err, cuts, L, lift.propagation, pieces * 2 * L * L * r)


def to_quotient_class(ext: SemisplitExtension, c: QkClass) -> QkClass:
    """Move an even class over M_n(A) into the quotient form used by ``ext``."""
    alg = c.representative.element.algebra
    try:
        ext.quotient_degree(c.representative.element)
        return c
    except AlgebraMismatch:
        pass
    if ext.quotient.scalar_mode == "extra" and c.parity == "even" and not alg.grid:
        return embed_unital_class(ext, c)
    raise UnsupportedAlgebra("class does not live over the quotient of this extension")


def _exp_2pi_i_hermitian(h: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (h + adjoint(h)))
    return (vecs * np.exp(2j * np.pi * vals)[..., None, :]) @ adjoint(vecs)


def _threshold(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (a + adjoint(a)))
    return (vecs * (vals > 0.5)[..., None, :]) @ adjoint(vecs)


def boundary_even(ext: SemisplitExtension, c: QkClass) -> BoundaryResult:
    """[p, l] in the quotient -> [1 + y_p] in the unitized ideal.

    z_p = sum_{l <= L} (2 pi i s(p))^l / l!, y_p = z_p - s(q(z_p)), L the
    exponential cutoff. The check value is ||1 + y_p - exp(2 pi i s(kappa0(p)))||.
    The output is accepted at 9 times the check value, i.e. at 3 alpha eps
    with alpha the smallest constant the check value satisfies.
    """
    c = to_quotient_class(ext, c)
    if c.parity != "even":
        raise ValueError("boundary_even takes an even class")
    w = c.representative
    if not w.epsilon < 0.25:
        raise ValueError("epsilon must be below 1/4")
    n = ext.quotient_degree(w.element)
    p = w.matrix
    L = series_cutoff_exp(w.epsilon)
    sp = ext.s_payload(p, n)
    zp = trunc_exp(2j * np.pi * sp, L)
    yp = zp - ext.s_payload(ext.q_payload(zp, n), n)
    u = _snap_ends(ext, np.eye(yp.shape[-1]) + yp)
    ref = _exp_2pi_i_hermitian(ext.s_payload(_threshold(p), n))
    check = op_norm(u - ref)
    defect = float(unitary_defects(u).max())
    eps_out = max(9.0 * check, 1e-12)
    alg = ext.ideal_n(n)
    wit = check_witness(element(alg, u), "unitary", eps_out, L * w.radius)

    def resample(ts: np.ndarray) -> np.ndarray:
        N2 = len(ts) - 1
        fine = regrid(ext, N2)
        if not np.allclose(ts, fine.total.sample_times[0]):
            raise ValueError("resampling needs a uniform grid")
        return boundary_even(fine, c).cls.representative.matrix

    out = QkClass("odd", wit, 0, {"operation": "boundary_even", "N": ext.N}, resample)
    return BoundaryResult(out, w.epsilon, w.radius, eps_out, wit.propagation, defect,
                          check_value=check, cutoff=L)


def boundary_odd(ext: SemisplitExtension, c: QkClass, N_homotopy: int = 256) -> BoundaryResult:
    """[u] in the quotient -> [h + diag(I_n, 0), n] in the unitized ideal.

    With v = u*, diag(u, u*) is joined to 1 by ``inverse_homotopy``, lifted to
    w by ``unitary_lift``; x = w diag(I_n, 0) w* and h is x - diag(I_n, 0)
    minus the section of its image in the quotient.
    """
    if c.parity != "odd":
        raise ValueError("boundary_odd takes an odd class")
    w = c.representative
    n = ext.quotient_degree(w.element)
    hom = inverse_homotopy(w, N_homotopy)
    lift = unitary_lift(ext, hom)
    total = ext.total_n(2 * n)
    m = total.size // (2 * n)
    d = np.zeros(total.shape, dtype=np.complex128)
    d[..., : n * m, : n * m] = np.eye(n * m)
    W = lift.lift.payload
    x = W @ d @ adjoint(W)
    y = x - d
    h = y - ext.s_payload(ext.q_payload(y, 2 * n), 2 * n)
    ph = _snap_ends(ext, h + d)
    ph = 0.5 * (ph + adjoint(ph))
    defect = float(projection_defects(ph.reshape((-1,) + ph.shape[-2:])).max())
    if not defect < 0.25:
        raise DefectTooLarge(defect, 0.25)
    eps_out = max(defect * (1 + 1e-9), 1e-12)
    alg = ext.ideal_n(2 * n)
    el = element(alg, ph)
    wit = check_witness(el, "projection", eps_out, el.propagation)
    out = QkClass("even", wit, n, {"operation": "boundary_odd", "N": ext.N})
    return BoundaryResult(out, w.epsilon, w.radius, eps_out, el.propagation, defect, lift=lift,
                          cutoff=lift.cutoff)


def z_loop(w, k: int = 0, N: int = 256) -> QkClass:
    """V(t) = diag(e^{-2 pi i k t} 1_A, 1, ..., 1) (q e^{2 pi i t} + 1 - q) in the suspension.

    The prefactor acts on the first copy of 1_A (the first ``unit_rank``
    coordinates); its winding is k times that rank. The loop is accepted at (5 eps, r).
    """
    if w.parity != "projection":
        raise ValueError("z_loop takes a projection witness")
    alg = w.element.algebra
    if not isinstance(alg, MatrixAlgebra) or alg.grid or alg.unitized:
        raise UnsupportedAlgebra("z_loop needs a unital finite-dimensional algebra")
    if not w.epsilon < 0.05:
        raise ValueError("z_loop needs epsilon < 1/20")
    q = w.matrix
    size = alg.size
    block = alg.unit_rank
    eye = np.eye(size, dtype=np.complex128)

    def loop(ts: np.ndarray) -> np.ndarray:
        ph = np.exp(2j * np.pi * ts)[:, None, None]
        z = q[None] * ph + (eye - q)[None]
        pre = np.ones((len(ts), size), dtype=np.complex128)
        pre[:, :block] = np.exp(-2j * np.pi * k * ts)[:, None]
        out = pre[:, :, None] * z
        out[0] = eye
        out[-1] = eye
        return out

    sus = unitization(path_algebra(alg, N, (True, True)))
    wit = check_witness(element(sus, loop(sus.sample_times[0])), "unitary",
                        5 * w.epsilon, w.radius)
    return QkClass("odd", wit, 0, {"operation": "z_loop", "k": k, "q": w}, loop)


def exactness_probe(ext: SemisplitExtension, c: QkClass, position: str) -> dict[str, Any]:
    """Evaluate the two composites adjacent to ``position`` on c.

    position "ideal": c lives in the unitized ideal; checks that q kills the
    ideal part of the representative exactly.
    position "total": c lives over the total algebra; its image in the
    quotient must have a boundary with invariant 0.
    """
    rep = c.representative
    if position == "ideal":
        a = rep.matrix
        m = ext.total.scalar_block
        z = a[(0,) * (a.ndim - 2)][::m, ::m]
        part = a - np.kron(z, np.eye(m))
        n = ext._ideal_degree(rep.element)
        img = ext.q_payload(part, n)
        ok = bool(np.all(img == 0))
        return {"position": position, "q_of_inclusion_max": float(np.abs(img).max()),
                "pass": ok}
    if position != "total":
        raise ValueError("position must be 'ideal' or 'total'")
    n = ext._matrix_degree(rep.element, ext.total)
    y = ext.q(rep.element)
    if c.parity == "even":
        wit = check_witness(y, "projection", rep.epsilon, rep.radius)
        qc = QkClass("even", wit, c.rank_offset)
        res = boundary_even(ext, qc)
        inv = k1_loop_invariant(res.cls)
        before = _total_even_invariant(rep.matrix, c.rank_offset * ext.base.size)
    else:
        wit = check_witness(y, "unitary", rep.epsilon, rep.radius)
        res = boundary_odd(ext, QkClass("odd", wit))
        inv = k0_invariant(res.cls)
        before = None
    return {"position": position, "n": n, "boundary_invariant": inv, "invariant_in": before,
            "eps_out": res.eps_out, "propagation": res.propagation, "defect": res.defect,
            "pass": inv == 0}


def _total_even_invariant(p: np.ndarray, offset: int) -> int:
    # rank at t = 0; constant along the path since every sample is gapped
    rank = int((np.linalg.eigvalsh(0.5 * (p[0] + adjoint(p[0]))) > 0.5).sum())
    return rank - offset
