"""Word metrics, discretized Rips complexes and the cutoff projection.

Groups expose a small oracle interface (``identity``, ``mul``, ``inv``,
``word_length``, ``ball``) and all lengths come from a breadth-first search of
the Cayley graph for right multiplication by generators. Rips vertices are
uniform probability measures on finite subsets of diameter at most d.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

from .errors import ConfigError, Explosion, IoError, OutOfWindow

__all__ = [
    "GeneratedGroup",
    "FiniteCayleyGroup",
    "FreeAbelianGroup",
    "FreeGroup",
    "symmetric_group",
    "cyclic_group",
    "trivial_group",
    "load_group",
    "RipsVertex",
    "CutoffFunction",
    "EPhiProjection",
    "rips_vertices",
    "cutoff",
    "e_phi",
    "s_const",
    "s_const_by_length",
]

Element = Hashable
DEFAULT_CAP = 10**6


class GeneratedGroup:
    """Group given by a multiplication oracle and a symmetric generating set."""

    kind = "abstract"

    def __init__(self, generators: Iterable[Element], radius_cap: int | None = None):
        gens = list(dict.fromkeys(generators))
        for s in list(gens):
            si = self.inv(s)
            if si not in gens:
                gens.append(si)
        self.generators: tuple[Element, ...] = tuple(g for g in gens if g != self.identity)
        self.radius_cap = radius_cap
        self._length: dict[Element, int] = {self.identity: 0}
        self._layers: list[list[Element]] = [[self.identity]]

    identity: Element

    def mul(self, g: Element, h: Element) -> Element:
        raise NotImplementedError

    def inv(self, g: Element) -> Element:
        raise NotImplementedError

    def sort_key(self, g: Element):
        return g

    def describe(self) -> dict:
        return {"type": self.kind}

    def _grow(self) -> bool:
        last = self._layers[-1]
        if not last:
            return False
        r = len(self._layers)
        if self.radius_cap is not None and r > self.radius_cap:
            return False
        nxt = []
        for g in last:
            for s in self.generators:
                h = self.mul(g, s)
                if h not in self._length:
                    self._length[h] = r
                    nxt.append(h)
        nxt.sort(key=self.sort_key)
        self._layers.append(nxt)
        return bool(nxt)

    def _exhausted(self) -> bool:
        return not self._layers[-1]

    def word_length(self, g: Element) -> int:
        while g not in self._length:
            if not self._grow():
                if self._exhausted():
                    raise ValueError(f"{g!r} is not reachable from the generators")
                raise OutOfWindow(f"{g!r} lies beyond radius cap {self.radius_cap}")
        return self._length[g]

    def distance(self, g: Element, h: Element) -> int:
        return self.word_length(self.mul(self.inv(g), h))

    def ball(self, radius: float) -> list[Element]:
        """Elements of length <= radius, ordered by (length, sort key)."""
        R = math.floor(radius + 1e-9)
        if self.radius_cap is not None and R > self.radius_cap:
            raise OutOfWindow(f"radius {R} exceeds cap {self.radius_cap}")
        while len(self._layers) <= R and self._grow():
            pass
        return [g for layer in self._layers[: R + 1] for g in layer]


class FiniteCayleyGroup(GeneratedGroup):
    kind = "finite-cayley"

    def __init__(self, table: Sequence[Sequence[int]], generators: Iterable[int]):
        t = [list(map(int, row)) for row in table]
        n = len(t)
        if n == 0 or any(len(row) != n for row in t):
            raise ValueError("Cayley table must be a nonempty square")
        if any(not 0 <= x < n for row in t for x in row):
            raise ValueError("Cayley table entries must be element indices")
        ident = [e for e in range(n) if all(t[e][x] == x and t[x][e] == x for x in range(n))]
        if len(ident) != 1:
            raise ValueError("Cayley table has no two-sided identity")
        self.identity = ident[0]
        self.table = t
        self.order = n
        self._inv = {}
        for a in range(n):
            inv = [b for b in range(n) if t[a][b] == self.identity]
            if len(inv) != 1 or t[inv[0]][a] != self.identity:
                raise ValueError(f"element {a} has no inverse")
            self._inv[a] = inv[0]
        super().__init__(generators, radius_cap=None)
        # reachability: the generators must generate
        self.ball(n)
        if len(self._length) != n:
            raise ValueError("generators do not generate the group")

    def mul(self, g, h):
        return self.table[g][h]

    def inv(self, g):
        return self._inv[g]

    def describe(self):
        return {"type": self.kind, "order": self.order, "generators": list(self.generators)}


class FreeAbelianGroup(GeneratedGroup):
    """Z^rank with the standard generators; elements are integer tuples."""

    kind = "Z^d"

    def __init__(self, rank: int, radius_cap: int | None = None):
        self.rank = rank
        self.identity = (0,) * rank
        gens = []
        for i in range(rank):
            e = [0] * rank
            e[i] = 1
            gens.append(tuple(e))
        super().__init__(gens, radius_cap)

    def mul(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def inv(self, g):
        return tuple(-a for a in g)

    def describe(self):
        return {"type": self.kind, "rank": self.rank, "radius_cap": self.radius_cap}


class FreeGroup(GeneratedGroup):
    """Free group on ``rank`` letters; elements are reduced words of +-(i+1)."""

    kind = "free"

    def __init__(self, rank: int, radius_cap: int):
        self.rank = rank
        self.identity = ()
        super().__init__([(i + 1,) for i in range(rank)], radius_cap)

    def mul(self, g, h):
        out = list(g)
        for x in h:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def inv(self, g):
        return tuple(-x for x in reversed(g))

    def sort_key(self, g):
        return (len(g), g)

    def describe(self):
        return {"type": self.kind, "rank": self.rank, "radius_cap": self.radius_cap}


def symmetric_group(n: int = 3, generators: str = "transpositions") -> FiniteCayleyGroup:
    """S_n on permutation tuples; generated by adjacent transpositions or (0 1), cycle."""
    perms = sorted(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    table = [[index[tuple(p[q[k]] for k in range(n))] for q in perms] for p in perms]
    if generators == "transpositions":
        gens = []
        for i in range(n - 1):
            s = list(range(n))
            s[i], s[i + 1] = s[i + 1], s[i]
            gens.append(index[tuple(s)])
    elif generators == "cycle":
        s = list(range(n))
        s[0], s[1] = 1, 0
        c = tuple((k + 1) % n for k in range(n))
        gens = [index[tuple(s)], index[c]]
    else:
        raise ValueError(generators)
    return FiniteCayleyGroup(table, gens)


def cyclic_group(n: int, generators: Sequence[int] = (1,)) -> FiniteCayleyGroup:
    table = [[(a + b) % n for b in range(n)] for a in range(n)]
    return FiniteCayleyGroup(table, generators)


def trivial_group() -> FiniteCayleyGroup:
    return FiniteCayleyGroup([[0]], [])


def load_group(path) -> GeneratedGroup:
    """Read a Cayley-table or builtin group description from JSON."""
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise IoError(p, "no such file") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(p, f"cannot parse ({exc})") from exc
    try:
        if "table" in data:
            grp = FiniteCayleyGroup(data["table"], data.get("generators", []))
            if "order" in data and int(data["order"]) != grp.order:
                raise ValueError("'order' does not match the table")
            return grp
        kind = data["type"]
        rank = int(data["rank"])
        cap = data.get("radius_cap")
        cap = None if cap is None else int(cap)
        if kind == "Z^d":
            return FreeAbelianGroup(rank, cap)
        if kind == "free":
            if cap is None:
                raise ValueError("free groups need a radius_cap")
            return FreeGroup(rank, cap)
        raise ValueError(f"unknown group type {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}: invalid group ({exc})") from exc


# ---------------------------------------------------------------------------
# Rips complex


@dataclass(frozen=True)
class RipsVertex:
    """Uniform probability measure on a finite support."""

    support: frozenset

    @property
    def measure(self) -> dict:
        w = 1.0 / len(self.support)
        return {g: w for g in self.support}

    def translate(self, group: GeneratedGroup, g: Element) -> RipsVertex:
        return RipsVertex(frozenset(group.mul(g, x) for x in self.support))

    def inside(self, group: GeneratedGroup, radius: float) -> bool:
        return all(group.word_length(x) <= radius for x in self.support)


def rips_vertices(group: GeneratedGroup, d: float, window: float,
                  cap: int = DEFAULT_CAP) -> list[RipsVertex]:
    """All subsets of B(e, window) of diameter <= d, in a fixed order."""
    if window < 2 * d:
        raise ValueError("window must be at least 2d")
    pts = group.ball(window)
    nbrs: list[list[int]] = []
    for i, x in enumerate(pts):
        nbrs.append([j for j in range(i + 1, len(pts)) if group.distance(x, pts[j]) <= d])
    adj = [set(n) for n in nbrs]
    out: list[RipsVertex] = []

    def extend(clique: list[int], cands: list[int]) -> None:
        out.append(RipsVertex(frozenset(pts[k] for k in clique)))
        if len(out) > cap:
            raise Explosion(f"more than {cap} Rips vertices")
        for pos, j in enumerate(cands):
            extend(clique + [j], [k for k in cands[pos + 1:] if k in adj[j]])

    for i in range(len(pts)):
        extend([i], nbrs[i])
    return out


@dataclass(frozen=True)
class CutoffFunction:
    """phi = psi / sum_g psi(g .), psi the indicator of supports in B(e, 2d)."""

    group: GeneratedGroup = field(repr=False)
    d: float
    values: dict = field(repr=False)

    def __call__(self, v: RipsVertex) -> float:
        return self.values.get(v.support, 0.0)

    def translates(self, v: RipsVertex) -> list[Element]:
        """All g with g.v inside B(e, 2d), i.e. where psi(g v) = 1."""
        return _translates_into(self.group, v.support, 2 * self.d)

    def partition_sum(self, v: RipsVertex) -> float:
        """sum_g phi(g^-1 v), summed over every g with a nonzero term."""
        return math.fsum(self(v.translate(self.group, g)) for g in self.translates(v))


def _translates_into(group: GeneratedGroup, support: frozenset, radius: float) -> list[Element]:
    # g x must land in the ball for a fixed x of F, so g ranges over ball * x^-1
    x0 = min(support, key=group.sort_key)
    x0i = group.inv(x0)
    out = []
    for b in group.ball(radius):
        g = group.mul(b, x0i)
        if all(group.word_length(group.mul(g, x)) <= radius for x in support):
            out.append(g)
    return out


def cutoff(group: GeneratedGroup, d: float, cap: int = DEFAULT_CAP) -> CutoffFunction:
    inner = rips_vertices(group, d, 2 * d, cap)
    values = {}
    for v in inner:
        count = len(_translates_into(group, v.support, 2 * d))
        # x^-1 F lies in B(e, d) for x in F, so count >= 1
        values[v.support] = 1.0 / count
    return CutoffFunction(group, d, values)


@dataclass(frozen=True)
class EPhiProjection:
    """Kernel g -> multiplication operator phi^1/2 . (phi^1/2 o g^-1).

    ``kernel[g]`` maps a vertex support to the value of e(g) there; vertices
    not listed carry 0. Products use the covariant rule
    (a * b)(g)(x) = sum_h a(h)(x) b(h^-1 g)(h^-1 x).
    """

    group: GeneratedGroup = field(repr=False)
    d: float
    kernel: dict = field(repr=False)

    def value(self, g: Element, support: frozenset) -> float:
        return self.kernel.get(g, {}).get(support, 0.0)

    @property
    def propagation(self) -> int:
        return max((self.group.word_length(g) for g, col in self.kernel.items()
                    if any(abs(v) > 1e-14 for v in col.values())), default=0)

    def square_defect(self, vertices: Iterable[RipsVertex]) -> float:
        """l^1 bound sum_g sup_x |(e*e - e)(g)(x)| over the given vertices."""
        grp = self.group
        per_g: dict = {}
        for v in vertices:
            x = v.support
            acc: dict = {}
            for h, col in self.kernel.items():
                a = col.get(x)
                if not a:
                    continue
                hx = frozenset(grp.mul(grp.inv(h), p) for p in x)
                for g2, col2 in self.kernel.items():
                    b = col2.get(hx)
                    if b:
                        g = grp.mul(h, g2)
                        acc[g] = acc.get(g, 0.0) + a * b
            for g in set(acc) | {g for g in self.kernel if x in self.kernel[g]}:
                diff = abs(acc.get(g, 0.0) - self.value(g, x))
                per_g[g] = max(per_g.get(g, 0.0), diff)
        return math.fsum(per_g.values())

    def adjoint_defect(self, vertices: Iterable[RipsVertex]) -> float:
        grp = self.group
        worst = 0.0
        for v in vertices:
            for g in self.kernel:
                gi = grp.inv(g)
                moved = frozenset(grp.mul(gi, p) for p in v.support)
                worst = max(worst, abs(self.value(g, v.support) - self.value(gi, moved)))
        return worst


def e_phi(group: GeneratedGroup, d: float, phi: CutoffFunction | None = None,
          cap: int = DEFAULT_CAP) -> EPhiProjection:
    phi = cutoff(group, d, cap) if phi is None else phi
    kernel: dict = {}
    for support, val in phi.values.items():
        v = RipsVertex(support)
        # e(g)(x) != 0 needs both x and g^-1 x in the support of phi
        for h in phi.translates(v):
            g = group.inv(h)
            moved = v.translate(group, h)
            kernel.setdefault(g, {})[support] = math.sqrt(val) * math.sqrt(phi(moved))
    return EPhiProjection(group, d, kernel)


def s_const(group: GeneratedGroup, d: float, cap: int = DEFAULT_CAP) -> int:
    """#{g : g W_d meets W_d}, W_d the vertices supported in B(e, 2d)."""
    found = set()
    for v in rips_vertices(group, d, 2 * d, cap):
        found.update(_translates_into(group, v.support, 2 * d))
    return len(found)


def s_const_by_length(group: GeneratedGroup, d: float) -> int:
    """The same count through the characterization l(g) <= 4d."""
    return len(group.ball(4 * d))
