"""Seeded generators of random exact and almost projections/unitaries.

Almost elements are perturbations p = kappa + delta * H of exact ones, with
delta solved so the measured defect equals a target drawn uniformly from
[eps/4, 3 eps/4].
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy.optimize import brentq
from scipy.stats import unitary_group

from .algebra import FiniteMetricSpace, MatrixAlgebra, band_algebra, element
from .linalg import adjoint, op_norm
from .quantk import QkWitness, check_witness, projection_defects, unitary_defects

__all__ = [
    "trial_rng",
    "clusters",
    "random_band_hermitian",
    "random_exact_projection",
    "random_exact_unitary",
    "perturb_to_defect",
    "random_projection_witness",
    "random_unitary_witness",
    "random_band_algebra",
]


def trial_rng(seed: int, suite: str, trial: int) -> np.random.Generator:
    """Independent stream for one trial, fixed by (seed, suite name, trial)."""
    tag = zlib.crc32(suite.encode())
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, trial)))


def clusters(space: FiniteMetricSpace, r: float, rng: np.random.Generator) -> list[list[int]]:
    """Random partition of the points into pieces of diameter <= r."""
    d = space.distances
    left = list(rng.permutation(space.size))
    out = []
    while left:
        seed = left.pop(0)
        piece = [seed]
        for x in list(left):
            if all(d[x, y] <= r for y in piece):
                piece.append(x)
                left.remove(x)
        out.append(sorted(int(i) for i in piece))
    return out


def _cluster_indices(alg: MatrixAlgebra, piece: list[int]) -> np.ndarray:
    loc = np.asarray(alg.locations)
    return np.flatnonzero(np.isin(loc, piece))


def random_band_hermitian(alg: MatrixAlgebra, r: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-norm Hermitian matrix supported within distance r."""
    m = alg.size
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    g = np.where(alg.index_distances <= r, g, 0.0)
    h = g + adjoint(g)
    return h / op_norm(h)


def random_exact_projection(alg: MatrixAlgebra, r: float, rng: np.random.Generator,
                            rank_prob: float = 0.5) -> np.ndarray:
    """Block-diagonal projection over pieces of diameter <= r."""
    p = np.zeros((alg.size, alg.size), dtype=np.complex128)
    for piece in clusters(alg.space, r, rng):
        idx = _cluster_indices(alg, piece)
        k = int(rng.binomial(len(idx), rank_prob))
        if k == 0:
            continue
        v = unitary_group.rvs(len(idx), random_state=rng) if len(idx) > 1 else np.ones((1, 1))
        p[np.ix_(idx, idx)] = v[:, :k] @ adjoint(v[:, :k])
    return 0.5 * (p + adjoint(p))


def random_exact_unitary(alg: MatrixAlgebra, r: float, rng: np.random.Generator) -> np.ndarray:
    u = np.zeros((alg.size, alg.size), dtype=np.complex128)
    for piece in clusters(alg.space, r, rng):
        idx = _cluster_indices(alg, piece)
        if len(idx) > 1:
            u[np.ix_(idx, idx)] = unitary_group.rvs(len(idx), random_state=rng)
        else:
            u[idx[0], idx[0]] = np.exp(2j * np.pi * rng.random())
    return u


def perturb_to_defect(base: np.ndarray, direction: np.ndarray, defect_fn, target: float) -> np.ndarray:
    """base + delta * direction with defect equal to target (delta >= 0)."""
    f = lambda t: float(defect_fn(base + t * direction)) - target
    hi = target
    while f(hi) < 0:
        hi *= 2
        if hi > 1e3:
            raise RuntimeError("cannot reach target defect")
    delta = brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-13)
    return base + delta * direction


def random_projection_witness(alg: MatrixAlgebra, eps: float, r: float,
                              rng: np.random.Generator) -> QkWitness:
    kappa = random_exact_projection(alg, r, rng)
    h = random_band_hermitian(alg, r, rng)
    target = rng.uniform(eps / 4, 3 * eps / 4)
    p = perturb_to_defect(kappa, h, projection_defects, target)
    return check_witness(element(alg, 0.5 * (p + adjoint(p))), "projection", eps, r)


def random_unitary_witness(alg: MatrixAlgebra, eps: float, r: float,
                           rng: np.random.Generator) -> QkWitness:
    u0 = random_exact_unitary(alg, r, rng)
    m = alg.size
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    g = np.where(alg.index_distances <= r, g, 0.0)
    g /= op_norm(g)
    target = rng.uniform(eps / 4, 3 * eps / 4)
    u = perturb_to_defect(u0, g, unitary_defects, target)
    return check_witness(element(alg, u), "unitary", eps, r)


def random_band_algebra(rng: np.random.Generator, max_size: int = 16,
                        max_points: int = 8) -> MatrixAlgebra:
    """Band algebra over a line with a random number of points and block size."""
    npts = int(rng.integers(2, max_points + 1))
    block = int(rng.integers(1, max(1, max_size // npts) + 1))
    return band_algebra(FiniteMetricSpace.line(npts), block)
