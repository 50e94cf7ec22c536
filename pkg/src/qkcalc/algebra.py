"""Concrete filtered *-algebras with exact propagation.

Matrix-type algebras (scalar matrices, band matrices over a finite metric
space, their amplifications, path algebras and unitizations) are all realized
as matrices acting on a finite set of located basis vectors. The payload of an
element is an array of shape ``(*samples, m, m)``; each path axis contributes
one leading sample axis. Propagation is the largest distance between the
locations of a pair of basis vectors carrying an entry above ``TAU``.

Group convolution algebras keep a sparse map from group elements to blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any

import numpy as np

from .errors import AlgebraMismatch, IoError, ConfigError
from .linalg import TAU, adjoint, op_norm
from .support import max_support_distance

__all__ = [
    "FiniteMetricSpace",
    "MatrixAlgebra",
    "GroupAlgebra",
    "FilteredElement",
    "matrix_algebra",
    "band_algebra",
    "amplify_algebra",
    "path_algebra",
    "unitization",
    "element",
    "alg_mul",
    "alg_norm",
    "amplify",
    "cone_section",
    "load_metric_space",
]

BOUNDARY_TOL = 1e-10


class FiniteMetricSpace:
    """A finite metric space stored by its full distance matrix."""

    def __init__(self, distances, check: bool = True):
        d = np.array(distances, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if check:
            _check_metric(d)
        d.setflags(write=False)
        self.distances = d
        self._key = (d.shape[0], d.tobytes())

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    def __eq__(self, other):
        return isinstance(other, FiniteMetricSpace) and (
            other is self or other._key == self._key
        )

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"FiniteMetricSpace(size={self.size})"

    @classmethod
    def point(cls) -> FiniteMetricSpace:
        return cls([[0.0]])

    @classmethod
    def line(cls, n: int) -> FiniteMetricSpace:
        x = np.arange(n, dtype=float)
        return cls(np.abs(x[:, None] - x[None, :]))

    @classmethod
    def discrete(cls, n: int) -> FiniteMetricSpace:
        return cls(1.0 - np.eye(n))

    @classmethod
    def from_coordinates(cls, coords) -> FiniteMetricSpace:
        c = np.asarray(coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        return cls(d)


def _check_metric(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError("distances must be finite and nonnegative")
    if np.any(np.diag(d) != 0):
        raise ValueError("distance matrix must have zero diagonal")
    if not np.array_equal(d, d.T):
        raise ValueError("distance matrix must be symmetric")
    off = ~np.eye(d.shape[0], dtype=bool)
    if np.any(d[off] <= 0):
        raise ValueError("distinct points need positive distance")
    # relative slack only absorbs rounding of Euclidean coordinates
    slack = 1e-12 * max(1.0, float(d.max(initial=0.0)))
    via = (d[:, :, None] + d[None, :, :]).min(axis=1)
    if np.any(d > via + slack):
        raise ValueError("distance matrix violates the triangle inequality")


def load_metric_space(path) -> FiniteMetricSpace:
    """Read ``{"points": n, "distances": [...]}`` or ``{"coordinates": [...]}``."""
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise IoError(p, "no such file") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(p, f"cannot parse ({exc})") from exc
    try:
        if "coordinates" in data:
            return FiniteMetricSpace.from_coordinates(data["coordinates"])
        space = FiniteMetricSpace(data["distances"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}: invalid metric space ({exc})") from exc
    if "points" in data and int(data["points"]) != space.size:
        raise ConfigError(f"{p}: 'points' does not match the distance matrix")
    return space


# ---------------------------------------------------------------------------
# matrix-type algebras


@dataclass(frozen=True, eq=False)
class MatrixAlgebra:
    """Descriptor of a matrix-type filtered algebra.

    ``grid[i]`` is the number of intervals N of path axis i (outermost first),
    ``vanish[i]`` the (t=0, t=1) vanishing flags of that axis.

    Unitizations come in two concrete forms. ``scalar_mode="face"`` is used
    for path algebras: every flagged face carries the scalar part z, stored
    as z (x) 1 with blocks of size ``scalar_block``. ``scalar_mode="extra"``
    realizes A + C for unital A as block-diagonal matrices diag(a + z, z);
    each block of size ``scalar_block`` ends with the extra index.

    ``unit_rank`` is the rank of the unit that a rank offset l counts.
    """

    kind: str
    space: FiniteMetricSpace
    locations: tuple[int, ...]
    grid: tuple[int, ...] = ()
    vanish: tuple[tuple[bool, bool], ...] = ()
    scalar_mode: str = ""
    scalar_block: int = 1
    unit_rank: int = 1
    inner: "MatrixAlgebra | None" = field(default=None, repr=False)

    def _key(self):
        return (self.kind, self.space, self.locations, self.grid, self.vanish,
                self.scalar_mode, self.scalar_block, self.unit_rank)

    def __eq__(self, other):
        return isinstance(other, MatrixAlgebra) and (
            other is self or other._key() == self._key()
        )

    def __hash__(self):
        return hash(self._key())

    @property
    def size(self) -> int:
        return len(self.locations)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.grid) + (self.size, self.size)

    @property
    def unitized(self) -> bool:
        return bool(self.scalar_mode)

    @property
    def is_unital(self) -> bool:
        return self.unitized or not any(any(v) for v in self.vanish)

    @cached_property
    def index_distances(self) -> np.ndarray:
        loc = np.asarray(self.locations, dtype=np.intp)
        d = np.ascontiguousarray(self.space.distances[np.ix_(loc, loc)])
        d.setflags(write=False)
        return d

    @cached_property
    def extra_indices(self) -> np.ndarray:
        b = self.scalar_block
        return np.arange(b - 1, self.size, b)

    @cached_property
    def core_indices(self) -> np.ndarray:
        b = self.scalar_block
        return np.array([i for i in range(self.size) if i % b != b - 1], dtype=np.intp)

    @cached_property
    def sample_times(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, 1.0, n + 1) for n in self.grid)

    def describe(self) -> dict[str, Any]:
        out = {"kind": self.kind, "size": self.size, "points": self.space.size}
        if self.grid:
            out["grid"] = list(self.grid)
            out["vanish"] = [list(v) for v in self.vanish]
        if self.unitized:
            out["unitized"] = self.scalar_mode
        return out

    # payload operations
    def zero(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=np.complex128)

    def unit(self) -> np.ndarray:
        if not self.is_unital:
            raise ValueError(f"{self.kind} algebra is not unital")
        return np.broadcast_to(np.eye(self.size, dtype=np.complex128), self.shape).copy()

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b

    def adj(self, a: np.ndarray) -> np.ndarray:
        return adjoint(a)

    def norm(self, a: np.ndarray) -> float:
        return op_norm(a)

    def propagation(self, a: np.ndarray) -> float:
        return max_support_distance(a, self.index_distances, TAU)

    def scalar_part(self, a: np.ndarray) -> np.ndarray:
        """The value z of the adjoined scalar, as a matrix over C."""
        b = self.scalar_block
        if self.scalar_mode == "face":
            return a[self._corner_index()][::b, ::b].copy()
        if self.scalar_mode == "extra":
            e = self.extra_indices
            return a[..., e[:, None], e[None, :]].copy()
        return np.zeros((self.size // b,) * 2, dtype=np.complex128)

    def core_part(self, a: np.ndarray) -> np.ndarray:
        """For the extra-index form: the block a + z with the scalar removed."""
        c = self.core_indices
        return a[..., c[:, None], c[None, :]].copy()

    def _corner_index(self) -> tuple[int, ...]:
        return tuple(0 if v[0] else -1 for v in self.vanish)

    def validate(self, a: np.ndarray) -> None:
        if a.shape != self.shape:
            raise ValueError(f"payload shape {a.shape} != {self.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("payload has non-finite entries")
        scale = 1.0 + float(np.abs(a).max(initial=0.0))
        if self.scalar_mode == "extra":
            e, c = self.extra_indices, self.core_indices
            cross = max(np.abs(a[..., e[:, None], c[None, :]]).max(initial=0.0),
                        np.abs(a[..., c[:, None], e[None, :]]).max(initial=0.0))
            if cross > BOUNDARY_TOL * scale:
                raise ValueError("scalar index is coupled to the algebra part")
            return
        if not any(any(v) for v in self.vanish):
            return
        if self.scalar_mode == "face":
            target = np.kron(self.scalar_part(a), np.eye(self.scalar_block))
        else:
            target = np.zeros((self.size, self.size))
        for axis, (v0, v1) in enumerate(self.vanish):
            for end, flag in ((0, v0), (-1, v1)):
                if not flag:
                    continue
                face = np.take(a, end, axis=axis)
                if np.abs(face - target).max(initial=0.0) > BOUNDARY_TOL * scale:
                    what = "scalar part" if self.unitized else "zero"
                    raise ValueError(
                        f"boundary face (axis {axis}, end {end}) is not the {what}"
                    )


def matrix_algebra(n: int) -> MatrixAlgebra:
    """M_n(C) with the trivial filtration: everything has propagation 0."""
    return MatrixAlgebra("scalar-matrix", FiniteMetricSpace.point(), (0,) * n)


def band_algebra(space: FiniteMetricSpace, block_dim: int = 1) -> MatrixAlgebra:
    locs = tuple(int(x) for x in np.repeat(np.arange(space.size), block_dim))
    return MatrixAlgebra("band", space, locs, unit_rank=len(locs))


def amplify_algebra(alg: MatrixAlgebra, n: int) -> MatrixAlgebra:
    """M_n(alg); block (i, j) of a payload is an element of alg."""
    if n == 1:
        return alg
    return MatrixAlgebra(
        "amplification-of", alg.space, alg.locations * n, alg.grid, alg.vanish,
        alg.scalar_mode, alg.scalar_block, alg.unit_rank, alg,
    )


def path_algebra(base: MatrixAlgebra, N: int = 256,
                 vanish: tuple[bool, bool] = (False, False)) -> MatrixAlgebra:
    """Paths [0,1] -> base sampled on a uniform grid with N intervals.

    ``vanish=(True, False)`` is the cone, ``(True, True)`` the suspension and
    ``(False, True)`` the half-open interval algebra.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if base.scalar_mode == "face":
        raise ValueError("take paths before unitizing")
    return MatrixAlgebra(
        "path-over", base.space, base.locations, (N,) + base.grid,
        (tuple(bool(v) for v in vanish),) + base.vanish, "",
        base.scalar_block if base.scalar_mode else base.size, base.unit_rank, base,
    )


def unitization(alg: MatrixAlgebra) -> MatrixAlgebra:
    """Adjoin a unit.

    Path algebras vanishing somewhere on every axis get the face form; a
    unital algebra A gets the extra-index form of A + C.
    """
    if alg.unitized:
        return alg
    if any(any(v) for v in alg.vanish):
        if not all(any(v) for v in alg.vanish):
            raise ValueError("unitization needs every path axis to vanish somewhere")
        return MatrixAlgebra(
            "unitization-of", alg.space, alg.locations, alg.grid, alg.vanish,
            "face", alg.size, alg.size, alg,
        )
    if alg.grid:
        raise ValueError("unital path algebras are unitized by their constants")
    return MatrixAlgebra(
        "unitization-of", alg.space, alg.locations + (alg.locations[0],), (), (),
        "extra", alg.size + 1, alg.size + 1, alg,
    )


# ---------------------------------------------------------------------------
# group convolution algebras


@dataclass(frozen=True, eq=False)
class GroupAlgebra:
    """Convolution algebra C_c(G, M_b(C)) with the trivial action."""

    group: Any
    block_dim: int = 1
    margin: int = 8
    kind: str = "group-convolution"

    def __eq__(self, other):
        return isinstance(other, GroupAlgebra) and (
            other is self
            or (other.group is self.group and other.block_dim == self.block_dim)
        )

    def __hash__(self):
        return hash((id(self.group), self.block_dim))

    @property
    def is_unital(self) -> bool:
        return True

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "group": self.group.describe(),
                "block_dim": self.block_dim}

    def _freeze(self, coeffs: dict) -> MappingProxyType:
        b = self.block_dim
        out = {}
        for g, blk in coeffs.items():
            arr = np.array(blk, dtype=np.complex128).reshape(b, b)
            arr.setflags(write=False)
            out[g] = arr
        return MappingProxyType(out)

    def zero(self):
        return MappingProxyType({})

    def unit(self):
        return self._freeze({self.group.identity: np.eye(self.block_dim)})

    def delta(self, g, block=None):
        blk = np.eye(self.block_dim) if block is None else block
        return self._freeze({g: blk})

    def add(self, a, b):
        out = dict(a)
        for g, blk in b.items():
            out[g] = out[g] + blk if g in out else blk
        return self._freeze(out)

    def scale(self, c, a):
        return self._freeze({g: c * blk for g, blk in a.items()})

    def mul(self, a, b):
        grp = self.group
        out: dict = {}
        for g, x in a.items():
            for h, y in b.items():
                k = grp.mul(g, h)
                out[k] = out[k] + x @ y if k in out else x @ y
        return self._freeze(out)

    def adj(self, a):
        grp = self.group
        return self._freeze({grp.inv(g): adjoint(blk) for g, blk in a.items()})

    def propagation(self, a) -> float:
        lengths = [self.group.word_length(g) for g, blk in a.items()
                   if np.abs(blk).max(initial=0.0) > TAU]
        return float(max(lengths, default=0))

    def default_radius(self, a) -> int:
        return int(2 * self.propagation(a) + self.margin)

    def regular_matrix(self, a, radius: int) -> np.ndarray:
        """Compression of left convolution to l^2(B(e, radius)) (x) C^b."""
        grp = self.group
        ball = grp.ball(radius)
        index = {g: i for i, g in enumerate(ball)}
        b = self.block_dim
        mat = np.zeros((len(ball) * b, len(ball) * b), dtype=np.complex128)
        for g, blk in a.items():
            for j, y in enumerate(ball):
                i = index.get(grp.mul(g, y))
                if i is not None:
                    mat[i * b:(i + 1) * b, j * b:(j + 1) * b] += blk
        return mat

    def norm(self, a, radius: int | None = None) -> float:
        """Norm estimate on the ball of the given radius.

        A lower bound of the reduced C*-norm; exact for finite groups once the
        ball covers the group.
        """
        r = self.default_radius(a) if radius is None else radius
        return op_norm(self.regular_matrix(a, r))


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True, eq=False)
class FilteredElement:
    """An algebra element; propagation and norm are computed from the payload."""

    algebra: MatrixAlgebra | GroupAlgebra
    payload: Any

    @cached_property
    def propagation(self) -> float:
        return self.algebra.propagation(self.payload)

    @cached_property
    def norm(self) -> float:
        return self.algebra.norm(self.payload)

    @property
    def matrix(self) -> np.ndarray:
        return self.payload

    def _check(self, other: FilteredElement) -> None:
        if not isinstance(other, FilteredElement) or other.algebra != self.algebra:
            raise AlgebraMismatch(
                f"{_describe(self.algebra)} vs {_describe(getattr(other, 'algebra', other))}"
            )

    def _new(self, payload) -> FilteredElement:
        return element(self.algebra, payload, validate=False)

    def adj(self) -> FilteredElement:
        return self._new(self.algebra.adj(self.payload))

    def __matmul__(self, other):
        return alg_mul(self, other)

    def __add__(self, other):
        self._check(other)
        if isinstance(self.algebra, GroupAlgebra):
            return self._new(self.algebra.add(self.payload, other.payload))
        return self._new(self.payload + other.payload)

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, FilteredElement):
            return NotImplemented
        if isinstance(self.algebra, GroupAlgebra):
            return self._new(self.algebra.scale(c, self.payload))
        return self._new(self.payload * c)

    __rmul__ = __mul__

    def unit(self) -> FilteredElement:
        return self._new(self.algebra.unit())

    def sample(self, *index) -> np.ndarray:
        return self.payload[index]


def _describe(alg) -> str:
    return json.dumps(alg.describe(), sort_keys=True) if hasattr(alg, "describe") else repr(alg)


def element(alg, payload, validate: bool = True) -> FilteredElement:
    if isinstance(alg, GroupAlgebra):
        data = payload if isinstance(payload, MappingProxyType) else alg._freeze(payload)
        return FilteredElement(alg, data)
    arr = np.array(payload, dtype=np.complex128)
    if arr.shape != alg.shape:
        # a single matrix is broadcast along every sample axis
        arr = np.broadcast_to(arr, alg.shape).copy()
    if validate:
        alg.validate(arr)
    arr.setflags(write=False)
    return FilteredElement(alg, arr)


def alg_mul(a: FilteredElement, b: FilteredElement) -> FilteredElement:
    a._check(b)
    return a._new(a.algebra.mul(a.payload, b.payload))


def alg_norm(a: FilteredElement, radius: int | None = None) -> float:
    if isinstance(a.algebra, GroupAlgebra):
        return a.algebra.norm(a.payload, radius)
    return a.norm


def amplify(a: FilteredElement, n: int) -> FilteredElement:
    """Corner embedding a -> diag(a, 0, ..., 0) in M_n."""
    alg = a.algebra
    if isinstance(alg, GroupAlgebra):
        raise TypeError("amplify a group kernel by enlarging block_dim instead")
    big = amplify_algebra(alg, n)
    m = alg.size
    out = np.zeros(big.shape, dtype=np.complex128)
    out[..., :m, :m] = a.payload
    return element(big, out, validate=False)


def cone_section(a: FilteredElement, N: int = 256) -> FilteredElement:
    """The path t -> t a in the cone algebra."""
    alg = a.algebra
    cone = path_algebra(alg, N, (True, False))
    t = np.linspace(0.0, 1.0, N + 1).reshape((-1,) + (1,) * (a.payload.ndim))
    return element(cone, t * a.payload[None], validate=False)
