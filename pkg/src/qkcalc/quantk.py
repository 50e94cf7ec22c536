"""The epsilon-r calculus of almost projections and almost unitaries.

Witnesses carry their measured defects. Normal forms are obtained by spectral
thresholding (projections) and polar decomposition (unitaries). Homotopies are
sampled closed forms, refined by midpoint doubling until consecutive samples
are close enough to certify the continuous path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Literal

import numpy as np
from scipy.linalg import schur

from .algebra import (
    FilteredElement,
    MatrixAlgebra,
    amplify_algebra,
    element,
    matrix_algebra,
    path_algebra,
)
from .errors import (
    BadRelaxation,
    DefectTooLarge,
    InsufficientSampling,
    NotSelfAdjoint,
    PropagationExceeded,
    TooFarApart,
    UnsupportedAlgebra,
)
from .linalg import (
    SELF_ADJOINT_TOL,
    adjoint,
    invsqrt_coeffs,
    op_norm,
    series_cutoff_invsqrt,
    trunc_poly,
)

__all__ = [
    "QkWitness",
    "QkClass",
    "SampledHomotopy",
    "ControlPair",
    "projection_defects",
    "unitary_defects",
    "check_witness",
    "kappa0",
    "kappa1",
    "rotation_homotopy",
    "inverse_homotopy",
    "conjugator",
    "scalar_projection_path",
    "scalar_unitary_path",
    "k0_invariant",
    "k1_loop_invariant",
    "loop_winding",
    "sphere_chern_number",
    "relax",
    "MAX_SAMPLES",
]

Parity = Literal["projection", "unitary"]
MAX_SAMPLES = 2**16
RADIUS_SLACK = 1e-12


def _sample_norms(h: np.ndarray) -> np.ndarray:
    """Per-sample operator norm of a stack of Hermitian matrices."""
    return np.abs(np.linalg.eigvalsh(h)).max(axis=-1)


def projection_defects(a: np.ndarray) -> np.ndarray:
    return _sample_norms(a @ a - a)


def unitary_defects(a: np.ndarray) -> np.ndarray:
    eye = np.eye(a.shape[-1])
    ah = adjoint(a)
    return np.maximum(_sample_norms(ah @ a - eye), _sample_norms(a @ ah - eye))


@dataclass(frozen=True)
class QkWitness:
    element: FilteredElement
    parity: Parity
    epsilon: float
    radius: float
    defect_sq: float
    defect_adj: float = 0.0

    @property
    def propagation(self) -> float:
        return self.element.propagation

    @property
    def matrix(self) -> np.ndarray:
        return self.element.payload


def check_witness(x: FilteredElement, parity: Parity, eps: float, r: float) -> QkWitness:
    """Measure x and accept it as an eps-r projection or unitary.

    Projections are symmetrized first; the stored element is the symmetrized
    one.
    """
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    alg = x.algebra
    a = x.payload
    if parity == "projection":
        skew = op_norm(a - adjoint(a))
        if skew > SELF_ADJOINT_TOL * (1.0 + x.norm):
            raise NotSelfAdjoint(skew)
        if skew > 0:
            x = element(alg, 0.5 * (a + adjoint(a)), validate=False)
        defect = float(projection_defects(x.payload).max())
    elif parity == "unitary":
        if not alg.is_unital:
            raise ValueError("unitaries need a unital (or unitized) algebra")
        skew = 0.0
        defect = float(unitary_defects(a).max())
    else:
        raise ValueError(f"unknown parity {parity!r}")
    if not defect < eps:
        raise DefectTooLarge(defect, eps)
    if x.propagation > r + RADIUS_SLACK:
        raise PropagationExceeded(x.propagation, r)
    return QkWitness(x, parity, eps, r, defect, skew)


def _require_calculus(w: QkWitness, parity: Parity) -> None:
    if w.parity != parity:
        raise ValueError(f"expected a {parity} witness")
    if not w.epsilon < 0.25:
        raise ValueError("normal forms need epsilon < 1/4")


def _threshold(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (a + adjoint(a)))
    keep = (vals > 0.5).astype(float)
    return (vecs * keep[..., None, :]) @ adjoint(vecs)


def _polar(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(adjoint(a) @ a)
    return a @ ((vecs * (vals ** -0.5)[..., None, :]) @ adjoint(vecs))


def kappa0(w: QkWitness) -> FilteredElement:
    """Spectral projection of w on (1/2, inf); carries no radius claim."""
    _require_calculus(w, "projection")
    return element(w.element.algebra, _threshold(w.matrix), validate=False)


def kappa1(w: QkWitness) -> FilteredElement:
    """Unitary part u (u*u)^(-1/2) of the polar decomposition."""
    _require_calculus(w, "unitary")
    return element(w.element.algebra, _polar(w.matrix), validate=False)


# ---------------------------------------------------------------------------
# sampled homotopies


@dataclass(frozen=True)
class SampledHomotopy:
    """Samples x(t_i) on a uniform grid, each a witness at (epsilon, radius)."""

    algebra: MatrixAlgebra
    samples: np.ndarray = field(repr=False)
    parity: Parity
    epsilon: float
    radius: float
    lipschitz_estimate: float
    defects: np.ndarray = field(repr=False)
    max_gap: float = 0.0

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def max_defect(self) -> float:
        return float(self.defects.max())

    @property
    def step_margin(self) -> float:
        div = 4.0 if self.parity == "projection" else 3.0
        return (self.epsilon - self.max_defect) / div

    def element(self, i: int) -> FilteredElement:
        return element(self.algebra, self.samples[i], validate=False)

    @property
    def path(self) -> FilteredElement:
        return element(path_algebra(self.algebra, self.N), self.samples, validate=False)


def sample_homotopy(fn: Callable[[np.ndarray], np.ndarray], alg: MatrixAlgebra,
                    parity: Parity, eps: float, r: float, N: int = 256) -> SampledHomotopy:
    """Sample fn on a grid and double it until the step margin certifies the path."""
    defect_fn = projection_defects if parity == "projection" else unitary_defects
    div = 4.0 if parity == "projection" else 3.0
    while True:
        ts = np.linspace(0.0, 1.0, N + 1)
        xs = np.asarray(fn(ts), dtype=np.complex128)
        flat = xs.reshape((N + 1, -1) + xs.shape[-2:])
        defects = defect_fn(flat).max(axis=1)
        if not defects.max() < eps:
            raise DefectTooLarge(float(defects.max()), eps)
        prop = alg.propagation(xs)
        if prop > r + RADIUS_SLACK:
            raise PropagationExceeded(prop, r)
        diffs = np.diff(flat, axis=0)
        gaps = np.linalg.svd(diffs, compute_uv=False)[..., 0].max(axis=1) if N else np.zeros(0)
        max_gap = float(gaps.max(initial=0.0))
        margin = (eps - defects.max()) / div
        if max_gap < margin:
            return SampledHomotopy(alg, xs, parity, eps, r, max_gap * N, defects, max_gap)
        if 2 * N > MAX_SAMPLES:
            raise InsufficientSampling(
                f"step {max_gap:.3e} still above margin {margin:.3e} at N={N}"
            )
        N *= 2


def _blocks(a11, a12, a21, a22) -> np.ndarray:
    top = np.concatenate([a11, a12], axis=-1)
    bot = np.concatenate([a21, a22], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _t(ts: np.ndarray, ndim: int) -> np.ndarray:
    return ts.reshape((-1,) + (1,) * ndim)


def rotation_homotopy(w: QkWitness, N: int = 256) -> SampledHomotopy:
    """diag(1, 0) -> diag(p, 1-p) through diag(p, 0) + (1-p) (x) h_t."""
    if w.parity != "projection":
        raise ValueError("rotation homotopy needs a projection witness")
    alg = w.element.algebra
    if not alg.is_unital:
        raise ValueError("rotation homotopy needs a unital algebra")
    p = w.matrix
    one = alg.unit()
    q = one - p
    big = amplify_algebra(alg, 2)

    def fn(ts):
        c = _t(np.cos(np.pi * ts / 2), p.ndim)
        s = _t(np.sin(np.pi * ts / 2), p.ndim)
        return _blocks(p + c * c * q, c * s * q, c * s * q, s * s * q)

    return sample_homotopy(fn, big, "projection", w.epsilon, w.radius, N)


def inverse_homotopy(w: QkWitness, N: int = 256) -> SampledHomotopy:
    """diag(u, u*) -> diag(uu*, 1) by rotation conjugation, then a ray to 1."""
    if w.parity != "unitary":
        raise ValueError("inverse homotopy needs a unitary witness")
    alg = w.element.algebra
    u = w.matrix
    one = alg.unit()
    uu = u @ adjoint(u)
    zero = np.zeros_like(u)
    big = amplify_algebra(alg, 2)
    nd = u.ndim

    def rot(theta):
        c = _t(np.cos(theta), nd) * one
        s = _t(np.sin(theta), nd) * one
        return _blocks(c, -s, s, c)

    du = _blocks(u + zero, zero, zero, one)
    dus = adjoint(du)
    end = _blocks(uu, zero, zero, one)
    eye2 = big.unit()

    def fn(ts):
        out = np.empty((len(ts),) + big.shape, dtype=np.complex128)
        first = ts <= 0.5
        if first.any():
            tau = 2 * ts[first]
            # tau = 0 gives diag(u, u*), tau = 1 gives diag(uu*, 1)
            r = rot(np.pi / 2 * (1 - tau))
            out[first] = du @ r @ dus @ adjoint(r)
        if (~first).any():
            tau = _t(2 * ts[~first] - 1, nd)
            out[~first] = (1 - tau) * end + tau * eye2
        return out

    return sample_homotopy(fn, big, "unitary", 3 * w.epsilon, 2 * w.radius, N)


def conjugator(p: QkWitness, q: QkWitness, eps: float | None = None,
               r: float | None = None) -> tuple[FilteredElement, float]:
    """Almost unitary W with W p W* close to q, and the achieved ||W p W* - q||.

    W = (z/2) sum_{k<=n} a_k ((z*z - 4)/4)^k with z = (2q-1)(2p-1)+1 and a_k
    the coefficients of (1+t)^(-1/2).
    """
    if p.element.algebra != q.element.algebra:
        raise ValueError("p and q must live in the same algebra")
    eps = max(p.epsilon, q.epsilon) if eps is None else eps
    dist = op_norm(p.matrix - q.matrix)
    if not dist < 1 / 16:
        raise TooFarApart(dist)
    alg = p.element.algebra
    one = alg.unit()
    z = (2 * q.matrix - one) @ (2 * p.matrix - one) + one
    n = series_cutoff_invsqrt(eps)
    x = (adjoint(z) @ z - 4 * one) / 4
    W = (z / 2) @ trunc_poly(x, list(invsqrt_coeffs(n)))
    achieved = op_norm(W @ p.matrix @ adjoint(W) - q.matrix)
    return element(alg, W, validate=False), achieved


def _scalar_check(p: np.ndarray, eps: float, parity: Parity) -> np.ndarray:
    a = np.asarray(p, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("expected a single matrix")
    if parity == "projection":
        skew = op_norm(a - adjoint(a))
        if skew > SELF_ADJOINT_TOL * (1 + op_norm(a)):
            raise NotSelfAdjoint(skew)
        a = 0.5 * (a + adjoint(a))
        d = float(projection_defects(a))
    else:
        d = float(unitary_defects(a))
    if not d < eps:
        raise DefectTooLarge(d, eps)
    return a


def _unitary_log_path(v: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """s -> exp((1-s) log v) for an exact unitary v, via its Schur form."""
    T, Z = schur(v, output="complex")
    theta = np.angle(np.diag(T))

    def path(s):
        ph = np.exp(1j * (1 - _t(s, 1)) * theta[None, :])
        return (Z[None] * ph[:, None, :]) @ adjoint(Z)[None]

    return path


def scalar_projection_path(p, eps: float, N: int = 256) -> SampledHomotopy:
    """Path of eps-projections over C from p to diag(I_k, 0), k = dim kappa0(p).

    First half: eigenvalues below 1/2 move as t*lam, the others as
    t*lam + 1 - t (t running from 1 to 0). Second half: a unitary geodesic
    moving the range of kappa0(p) onto the first k coordinates.
    """
    a = _scalar_check(p, eps, "projection")
    n = a.shape[0]
    vals, vecs = np.linalg.eigh(a)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    upper = vals > 0.5
    k = int(upper.sum())
    target = np.diag(np.r_[np.ones(k), np.zeros(n - k)]).astype(complex)
    geo = _unitary_log_path(vecs)

    def fn(ts):
        out = np.empty((len(ts), n, n), dtype=np.complex128)
        first = ts <= 0.5
        if first.any():
            t = 1 - 2 * ts[first][:, None]
            lam = np.where(upper[None, :], t * vals[None, :] + 1 - t, t * vals[None, :])
            out[first] = (vecs[None] * lam[:, None, :]) @ adjoint(vecs)[None]
        if (~first).any():
            V = geo(2 * ts[~first] - 1)
            out[~first] = V @ target @ adjoint(V)
        return out

    return sample_homotopy(fn, matrix_algebra(n), "projection", eps, 0.0, N)


def scalar_unitary_path(u, eps: float, N: int = 256) -> SampledHomotopy:
    """Path of eps-unitaries over C from u to the identity.

    First half: v_t = u h_t with h_t = (u*u)^(-t/2). Second half: the geodesic
    from the polar part to 1 through the spectral logarithm.
    """
    a = _scalar_check(u, eps, "unitary")
    n = a.shape[0]
    lam, w = np.linalg.eigh(adjoint(a) @ a)
    polar = a @ ((w * lam ** -0.5) @ adjoint(w))
    geo = _unitary_log_path(polar)
    eye = np.eye(n, dtype=np.complex128)

    def fn(ts):
        out = np.empty((len(ts), n, n), dtype=np.complex128)
        first = ts <= 0.5
        if first.any():
            t = 2 * ts[first][:, None]
            h = (w[None] * (lam[None, :] ** (-t / 2))[:, None, :]) @ adjoint(w)[None]
            out[first] = a[None] @ h
        if (~first).any():
            out[~first] = geo(2 * ts[~first] - 1)
        if ts[-1] == 1.0:
            out[-1] = eye
        return out

    return sample_homotopy(fn, matrix_algebra(n), "unitary", eps, 0.0, N)


# ---------------------------------------------------------------------------
# classes and invariants


@dataclass(frozen=True)
class QkClass:
    """Representative of [p, l]_{eps,r} (even) or [u]_{eps,r} (odd).

    ``resample`` optionally evaluates the closed form of a path representative
    on arbitrary times, which lets invariants refine the grid. ``origin``
    records how the class was built.
    """

    parity: Literal["even", "odd"]
    representative: QkWitness
    rank_offset: int = 0
    origin: dict[str, Any] = field(default_factory=dict, compare=False)
    resample: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        want = "projection" if self.parity == "even" else "unitary"
        if self.representative.parity != want:
            raise ValueError(f"{self.parity} class needs a {want} representative")
        alg = self.representative.element.algebra
        if self.parity == "even" and getattr(alg, "unitized", False):
            z = alg.scalar_part(self.representative.matrix)
            dim = int((np.linalg.eigvalsh(0.5 * (z + adjoint(z))) > 0.5).sum())
            if dim != self.rank_offset:
                raise ValueError(
                    f"scalar part has dim kappa0 = {dim} but rank offset is {self.rank_offset}"
                )

    @property
    def epsilon(self) -> float:
        return self.representative.epsilon

    @property
    def radius(self) -> float:
        return self.representative.radius


def k0_invariant(c: QkClass) -> int:
    """Integer K0 invariant of an even class.

    Over a finite-dimensional algebra it is dim kappa0(p) - l * (rank of the
    unit that l counts). Over the double suspension of a finite-dimensional
    algebra it is the Chern number of the projection field, see
    ``sphere_chern_number``.
    """
    if c.parity != "even":
        raise ValueError("k0_invariant takes an even class")
    alg = c.representative.element.algebra
    if not isinstance(alg, MatrixAlgebra):
        raise UnsupportedAlgebra(f"no K0 model for {getattr(alg, 'kind', alg)!r}")
    p = c.representative.matrix
    if not alg.grid:
        rank = int((np.linalg.eigvalsh(0.5 * (p + adjoint(p))) > 0.5).sum())
        return rank - c.rank_offset * alg.unit_rank
    if len(alg.grid) == 2 and alg.scalar_mode == "face" and all(
        v == (True, True) for v in alg.vanish
    ):
        return sphere_chern_number(p)
    raise UnsupportedAlgebra(f"no K0 model for {alg.kind} with grid {alg.grid}")


def sphere_chern_number(p: np.ndarray) -> int:
    """Chern number of a projection field on the sampled square.

    The field is constant on the boundary, so the square closes up to a
    sphere. Lattice link variables of the range frames give a gauge
    invariant integer. The sphere is oriented by (inner axis, outer axis);
    with this choice the odd boundary of the cone extension agrees in sign
    with the Toeplitz index map built from the same w diag(1,0) w* formula.
    """
    vals, vecs = np.linalg.eigh(0.5 * (p + adjoint(p)))
    ranks = (vals > 0.5).sum(axis=-1)
    k = int(ranks.flat[0])
    if np.any(ranks != k):
        raise ValueError("rank of kappa0 changes over the square")
    frame = vecs[..., -k:] if k else vecs[..., :0]
    if k == 0:
        return 0

    def link(a, b):
        d = np.linalg.det(adjoint(a) @ b)
        return d / np.abs(d)

    u1 = link(frame[:-1, :], frame[1:, :])
    u2 = link(frame[:, :-1], frame[:, 1:])
    flux = np.angle(u1[:, :-1] * u2[1:, :] / (u1[:, 1:] * u2[:-1, :]))
    # the plaquette loop above runs outer-then-inner; reverse it
    return -int(round(flux.sum() / (2 * np.pi)))


def loop_winding(payload: np.ndarray) -> tuple[int, float]:
    """Winding of det over a sampled loop and the largest phase step."""
    sign, _ = np.linalg.slogdet(payload)
    steps = np.angle(sign[1:] / sign[:-1])
    total = steps.sum() / (2 * np.pi)
    return int(round(total)), float(np.abs(steps).max(initial=0.0))


def k1_loop_invariant(c: QkClass) -> int:
    """Winding number of t -> det(kappa1(u(t))) for a loop representative."""
    if c.parity != "odd":
        raise ValueError("k1_loop_invariant takes an odd class")
    alg = c.representative.element.algebra
    if not isinstance(alg, MatrixAlgebra) or len(alg.grid) != 1:
        raise UnsupportedAlgebra("expected a loop over a finite-dimensional algebra")
    u = c.representative.matrix
    if op_norm(u[0] - u[-1]) > 1e-10 * (1 + op_norm(u)):
        raise ValueError("representative is not a loop: endpoints differ")
    # det(kappa1(u)) = det(u) / |det(u)|, so the phase of det(u) suffices
    wind, step = loop_winding(u)
    N = u.shape[0] - 1
    while step >= np.pi / 2:
        if c.resample is None or 2 * N > MAX_SAMPLES:
            raise InsufficientSampling(f"phase step {step:.3f} >= pi/2 at N={N}")
        N *= 2
        wind, step = loop_winding(c.resample(np.linspace(0.0, 1.0, N + 1)))
    return wind


def relax(c: QkClass, eps2: float, r2: float) -> QkClass:
    """Re-tag the representative at weaker (eps2, r2)."""
    if not (c.epsilon <= eps2 < 0.25 and c.radius <= r2):
        raise BadRelaxation(
            f"cannot relax ({c.epsilon}, {c.radius}) to ({eps2}, {r2})"
        )
    rep = replace(c.representative, epsilon=eps2, radius=r2)
    return replace(c, representative=rep)


# ---------------------------------------------------------------------------
# control pairs


@dataclass(frozen=True)
class ControlPair:
    """lambda > 1 and a table eps -> h_eps dominated by a non-increasing step map."""

    lam: float
    table: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.lam > 1:
            raise ValueError("lambda must exceed 1")
        eps = [e for e, _ in self.table]
        if eps != sorted(eps) or len(set(eps)) != len(eps):
            raise ValueError("table must be sorted by increasing epsilon")
        hs = [h for _, h in self.table]
        if any(b > a for a, b in zip(hs, hs[1:])):
            raise ValueError("h must be non-increasing in epsilon")

    def h(self, eps: float) -> float:
        """Smallest non-increasing step majorant of the table, at eps."""
        best = None
        for e, h in self.table:
            if e <= eps:
                best = h
        if best is None:
            raise ValueError(f"eps {eps} is below the table range")
        return best

    def compose(self, inner: ControlPair) -> ControlPair:
        """(lam lam', h * h') with (h * h')_eps = h_{lam' eps} h'_eps."""
        rows = []
        for e, h2 in inner.table:
            x = inner.lam * e
            if x >= self.table[0][0]:
                rows.append((e, self.h(x) * h2))
        return ControlPair(self.lam * inner.lam, tuple(rows))

    @classmethod
    def from_measurements(cls, pairs) -> ControlPair:
        """Tightest pair dominating measured (eps, eps_out/eps, r_out/r) rows."""
        rows = sorted(pairs)
        lam = max(1.0 + 1e-12, max(a for _, a, _ in rows))
        table = []
        running = 0.0
        for e, _, k in reversed(rows):
            running = max(running, k)
            table.append((e, running))
        return cls(lam, tuple(reversed(table)))
