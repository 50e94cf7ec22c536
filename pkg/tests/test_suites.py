import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkcalc import suites
from qkcalc.algebra import FiniteMetricSpace, band_algebra
from qkcalc.quantk import projection_defects, unitary_defects
from qkcalc.witnesses import (
    clusters,
    perturb_to_defect,
    random_band_hermitian,
    random_exact_projection,
    random_exact_unitary,
    random_projection_witness,
    trial_rng,
)


def test_trial_streams_are_independent_of_order():
    a = trial_rng(42, "s", 3).random(4)
    trial_rng(42, "s", 1).random(100)
    assert np.array_equal(trial_rng(42, "s", 3).random(4), a)
    assert not np.array_equal(trial_rng(42, "t", 3).random(4), a)


def test_map_trials_keeps_order():
    out = suites._map_trials(lambda i: {"i": i}, 50)
    assert [r["i"] for r in out] == list(range(50))


def test_records_repeat_exactly():
    a = suites.run_suite("spectrum", 5, [0.05], 8)
    b = suites.run_suite("spectrum", 5, [0.05], 8)
    assert [r.as_dict() for r in a] == [r.as_dict() for r in b]


def test_eps_filter():
    assert suites.run_suite("conjugator", 1, [0.1], 2) == []


def test_spectrum_intervals_contain_exact_points():
    (a, b), (c, d) = suites.spectrum_intervals(0.1)
    assert a < 0 < b < 0.5 < c < 1 < d


@given(st.integers(0, 2**32 - 1), st.floats(0.5, 3.0))
def test_clusters_partition(seed, r):
    rng = np.random.default_rng(seed)
    space = FiniteMetricSpace.line(9)
    pieces = clusters(space, r, rng)
    assert sorted(i for p in pieces for i in p) == list(range(9))
    for p in pieces:
        assert max(p) - min(p) <= r


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.01, 0.1, 0.2]))
def test_generators(seed, eps):
    rng = np.random.default_rng(seed)
    alg = band_algebra(FiniteMetricSpace.line(6), 2)
    r = 1.0
    p = random_exact_projection(alg, r, rng)
    u = random_exact_unitary(alg, r, rng)
    assert projection_defects(p) < 1e-12 and unitary_defects(u) < 1e-12
    assert alg.propagation(p) <= r and alg.propagation(u) <= r
    h = random_band_hermitian(alg, r, rng)
    assert np.linalg.norm(h, 2) == pytest.approx(1.0)
    target = 0.3 * eps
    q = perturb_to_defect(p, h, projection_defects, target)
    assert projection_defects(q) == pytest.approx(target, rel=1e-6)
    w = random_projection_witness(alg, eps, r, rng)
    assert eps / 4 <= w.defect_sq <= 3 * eps / 4 + 1e-12
