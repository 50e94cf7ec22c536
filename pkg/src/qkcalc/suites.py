"""Randomized property suites and their check records.

Each suite maps (seed, eps, trials) to a record. Trials run in a thread
pool but are merged in trial order, and every trial draws from its own
stream, so records are a pure function of the arguments.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .algebra import element, matrix_algebra
from .controlled import (
    boundary_even,
    exactness_probe,
    make_cone_extension,
    toeplitz_pair,
    z_loop,
)
from .groups import (
    FreeAbelianGroup,
    cutoff,
    e_phi,
    rips_vertices,
    s_const,
    symmetric_group,
)
from .linalg import adjoint, op_norm, series_cutoff_exp, series_cutoff_invsqrt, trunc_exp
from .quantk import (
    QkClass,
    check_witness,
    conjugator,
    inverse_homotopy,
    k0_invariant,
    k1_loop_invariant,
    kappa0,
    kappa1,
    projection_defects,
    rotation_homotopy,
)
from .witnesses import (
    perturb_to_defect,
    random_band_algebra,
    random_band_hermitian,
    random_exact_projection,
    random_projection_witness,
    random_unitary_witness,
    trial_rng,
)

__all__ = ["CheckRecord", "Suite", "SUITES", "run_suite", "EVEN_BOUNDARY_CONSTANT", "spectrum_intervals"]

EVEN_BOUNDARY_CONSTANT = 2 * (2 * math.exp(10) + 1)
MAX_WORKERS = 4


@dataclass(frozen=True)
class CheckRecord:
    name: str
    anchor: str
    epsilon: float | None
    trials: int
    failures: int
    constants: dict[str, float]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "paper_anchor": self.anchor,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "failures": self.failures,
            "measured_constants": {k: self.constants[k] for k in sorted(self.constants)},
            "notes": list(self.notes),
            "pass": self.passed,
        }


def _map_trials(fn: Callable[[int], dict], trials: int) -> list[dict]:
    if trials <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        return list(pool.map(fn, range(trials)))


def _line_algebra(rng: np.random.Generator, max_size: int = 16):
    return random_band_algebra(rng, max_size=max_size)


def spectrum_intervals(eps: float) -> tuple[tuple[float, float], tuple[float, float]]:
    lo = ((1 - math.sqrt(1 + 4 * eps)) / 2, (1 - math.sqrt(1 - 4 * eps)) / 2)
    hi = ((1 + math.sqrt(1 - 4 * eps)) / 2, (1 + math.sqrt(1 + 4 * eps)) / 2)
    return lo, hi


# ---------------------------------------------------------------------------
# suites


def suite_spectrum(seed: int, eps: float, trials: int) -> CheckRecord:
    (a, b), (c, d) = spectrum_intervals(eps)

    def one(i):
        rng = trial_rng(seed, f"spectrum/{eps}", i)
        alg = _line_algebra(rng)
        w = random_projection_witness(alg, eps, float(rng.integers(1, 4)), rng)
        vals = np.linalg.eigvalsh(w.matrix)
        inside = np.all(((vals >= a) & (vals <= b)) | ((vals >= c) & (vals <= d)))
        return {"ok": bool(inside and op_norm(w.matrix) < 1 + eps),
                "norm_excess": op_norm(w.matrix) - 1}

    rows = _map_trials(one, trials)
    worst = max(r["norm_excess"] for r in rows) / eps
    return CheckRecord("spectrum", "almost-projection/spectral-gap", eps, trials,
                       sum(not r["ok"] for r in rows), {"norm_excess_over_eps": worst})


def suite_normal_forms(seed: int, eps: float, trials: int) -> CheckRecord:
    def one(i):
        # same stream as the spectrum suite, so the projections are identical
        rng = trial_rng(seed, f"spectrum/{eps}", i)
        alg = _line_algebra(rng)
        r = float(rng.integers(1, 4))
        w = random_projection_witness(alg, eps, r, rng)
        u = random_unitary_witness(alg, eps, r, rng)
        dp = op_norm(w.matrix - kappa0(w).payload)
        du = op_norm(u.matrix - kappa1(u).payload)
        return {"ok": dp < 2 * eps and du < eps, "dp": dp / eps, "du": du / eps}

    rows = _map_trials(one, trials)
    return CheckRecord("normal_forms", "normal-forms/threshold-and-polar", eps, trials,
                       sum(not r["ok"] for r in rows),
                       {"kappa0_dist_over_eps": max(r["dp"] for r in rows),
                        "kappa1_dist_over_eps": max(r["du"] for r in rows)})


def suite_product(seed: int, eps: float, trials: int) -> CheckRecord:
    def one(i):
        rng = trial_rng(seed, f"product/{eps}", i)
        alg = _line_algebra(rng)
        r = float(rng.integers(1, 3))
        u = random_unitary_witness(alg, eps, r, rng)
        v = random_unitary_witness(alg, eps, r, rng)
        uv = u.element @ v.element
        ok = uv.propagation <= u.propagation + v.propagation
        try:
            check_witness(uv, "unitary", eps * (2 + eps), 2 * r)
        except ValueError:
            ok = False
        return {"ok": bool(ok)}

    rows = _map_trials(one, trials)
    return CheckRecord("product", "almost-unitary/product-law", eps, trials,
                       sum(not r["ok"] for r in rows), {})


def _close_pair(alg, eps, r, rng, attempts: int = 100):
    """Two eps-projections perturbing one exact projection, closer than 1/16."""
    for _ in range(attempts):
        kappa = random_exact_projection(alg, r, rng)
        out = []
        for _ in range(2):
            h = random_band_hermitian(alg, r, rng)
            target = rng.uniform(eps / 4, 3 * eps / 4)
            p = perturb_to_defect(kappa, h, projection_defects, target)
            out.append(check_witness(element(alg, 0.5 * (p + adjoint(p))), "projection", eps, r))
        if op_norm(out[0].matrix - out[1].matrix) < 1 / 16:
            return out
    raise RuntimeError("could not draw a close pair")


def suite_conjugator(seed: int, eps: float, trials: int) -> CheckRecord:
    n = series_cutoff_invsqrt(eps)

    def one(i):
        rng = trial_rng(seed, f"conjugator/{eps}", i)
        alg = _line_algebra(rng)
        r = float(rng.integers(1, 3))
        p, q = _close_pair(alg, eps, r, rng)
        W, achieved = conjugator(p, q, eps)
        return {"prop_ok": W.propagation <= (4 * n + 2) * r, "lam": achieved / eps,
                "k": W.propagation / r}

    rows = _map_trials(one, trials)
    return CheckRecord("conjugator", "conjugation/series-inverse-square-root", eps, trials,
                       sum(not r["prop_ok"] for r in rows),
                       {"lambda_emp": max(r["lam"] for r in rows),
                        "k_emp": max(r["k"] for r in rows), "n_eps": float(n)})


def suite_boundary_even(seed: int, eps: float, trials: int, N: int = 256) -> CheckRecord:
    L = series_cutoff_exp(eps)

    def one(i):
        rng = trial_rng(seed, f"boundary_even/{eps}", i)
        alg = random_band_algebra(rng, max_size=8)
        r = float(rng.integers(1, 3))
        w = random_projection_witness(alg, eps, r, rng)
        res = boundary_even(make_cone_extension(alg, N), QkClass("even", w, 0))
        u = res.cls.representative
        ok = (res.check_value < EVEN_BOUNDARY_CONSTANT * eps
              and u.propagation <= L * r and u.defect_sq < res.eps_out)
        return {"ok": bool(ok), "check": res.check_value / eps, "alpha": res.alpha_emp,
                "k": res.k_emp}

    rows = _map_trials(one, trials)
    return CheckRecord("boundary_even", "even-boundary/truncated-exponential", eps, trials,
                       sum(not r["ok"] for r in rows),
                       {"check_over_eps": max(r["check"] for r in rows),
                        "alpha_emp": max(r["alpha"] for r in rows),
                        "k_emp": max(r["k"] for r in rows), "l_eps": float(L)})


def suite_winding_anchor(seed: int, eps: float, trials: int) -> CheckRecord:
    eps = min(eps, 0.01)
    notes = []
    fails = 0
    one = check_witness(element(matrix_algebra(1), [[1.0]]), "projection", eps, 0.0)
    res = boundary_even(make_cone_extension(matrix_algebra(1), 256), QkClass("even", one, 0))
    wind = k1_loop_invariant(res.cls)
    notes.append(f"boundary_even([1,0]) winding {wind}")
    fails += wind != 1
    for k in range(6):
        q = np.diag([1.0] * k + [0.0] * (6 - k))
        w = check_witness(element(matrix_algebra(6), q), "projection", eps, 0.0)
        got = k1_loop_invariant(z_loop(w, 0))
        notes.append(f"z_loop rank {k} winding {got}")
        fails += got != k
    return CheckRecord("winding_anchor", "even-boundary/winding-anchor", eps, 7, int(fails), {},
                       tuple(notes))


def suite_round_trip(seed: int, eps: float, trials: int, N: int = 256) -> CheckRecord:
    def one(i):
        rng = trial_rng(seed, f"round_trip/{eps}", i)
        alg = random_band_algebra(rng, max_size=8)
        w = random_projection_witness(alg, eps, float(rng.integers(1, 3)), rng)
        c = QkClass("even", w, int(rng.integers(0, 3)))
        res = boundary_even(make_cone_extension(alg, N), c)
        return {"ok": k1_loop_invariant(res.cls) == k0_invariant(c)}

    rows = _map_trials(one, trials)
    return CheckRecord("round_trip", "cone-extension/loop-comparison", eps, trials,
                       sum(not r["ok"] for r in rows), {})


def suite_toeplitz(seed: int, eps: float, trials: int, N: int = 256) -> CheckRecord:
    def one(i):
        rng = trial_rng(seed, f"toeplitz/{eps}", i)
        alg = random_band_algebra(rng, max_size=4, max_points=4)
        w = random_projection_witness(alg, eps, 1.0, rng)
        k = int(rng.integers(-8, 9))
        c = z_loop(w, k, N)
        res = toeplitz_pair(c, N)
        ok = res.passes and res.invariant == k1_loop_invariant(c) and res.c_emp <= 10
        return {"ok": bool(ok), "c": res.c_emp, "dist": res.distance / eps}

    rows = _map_trials(one, trials)
    return CheckRecord("toeplitz", "toeplitz-extension/morita-pairing", eps, trials,
                       sum(not r["ok"] for r in rows),
                       {"c_emp": max(r["c"] for r in rows),
                        "distance_over_eps": max(r["dist"] for r in rows)})


def suite_lipschitz(seed: int, eps: float, trials: int) -> CheckRecord:
    def one(i):
        rng = trial_rng(seed, f"lipschitz/{eps}", i)
        alg = random_band_algebra(rng, max_size=8)
        r = float(rng.integers(1, 3))
        w = random_projection_witness(alg, eps, r, rng)
        rot = rotation_homotopy(w, 256)
        u = random_unitary_witness(alg, eps, r, rng)
        inv = inverse_homotopy(u, 256)
        ok = rot.lipschitz_estimate <= 2 + 1e-6 and inv.max_defect < 3 * eps
        ok = ok and inv.algebra.propagation(inv.samples) <= 2 * r
        return {"ok": bool(ok), "lip": rot.lipschitz_estimate}

    rows = _map_trials(one, trials)
    return CheckRecord("lipschitz", "homotopy/rotation-lipschitz", eps, trials,
                       sum(not r["ok"] for r in rows),
                       {"lipschitz_estimate": max(r["lip"] for r in rows)})


GROUP_CASES = (("S3", lambda: symmetric_group(3), None), ("Z", lambda: cyclic_free(1), 8),
               ("Z2", lambda: cyclic_free(2), 4))


def cyclic_free(rank: int):
    return FreeAbelianGroup(rank)


def rips_report(group, d: float, window: float | None) -> dict[str, Any]:
    e = e_phi(group, d)
    win = window if window is not None else max(2 * d, 4)
    verts = rips_vertices(group, d, win)
    phi = cutoff(group, d)
    return {
        "d": d,
        "vertex_count": len(verts),
        "s_const": s_const(group, d),
        "e_phi_defect": max(e.square_defect(verts), e.adjoint_defect(verts)),
        "e_phi_propagation": e.propagation,
        "partition_error": max(abs(phi.partition_sum(v) - 1.0) for v in verts),
    }


def suite_groups(seed: int, eps: float, trials: int) -> CheckRecord:
    fails = 0
    notes = []
    worst_defect = 0.0
    for name, make, window in GROUP_CASES:
        for d in (1, 2):
            rep = rips_report(make(), d, window)
            ok = (rep["e_phi_defect"] <= 1e-10 and rep["partition_error"] <= 1e-12
                  and rep["e_phi_propagation"] <= rep["s_const"])
            worst_defect = max(worst_defect, rep["e_phi_defect"])
            fails += not ok
            notes.append(f"{name} d={d}: s_const {rep['s_const']}, "
                         f"propagation {rep['e_phi_propagation']}, vertices {rep['vertex_count']}")
    z1 = s_const(cyclic_free(1), 1)
    fails += z1 != 9
    notes.append(f"s_const(Z, 1) = {z1}")
    return CheckRecord("group_geometry", "rips-complex/cutoff-projection", None, 7, int(fails),
                       {"e_phi_defect": worst_defect}, tuple(notes))


def _pulled_back_class(ext, alg, eps, rng):
    """A class over the cone: t -> E_t z E_t*, E_t a truncated exp(i t theta H)."""
    m = alg.size
    z = float(rng.integers(0, 2))
    h = random_band_hermitian(alg, 1.0, rng) * rng.uniform(0.5, 3.0)
    ts = ext.total.sample_times[0].reshape(-1, 1, 1)
    E = trunc_exp(1j * ts * h[None], 40)
    f = E @ (z * np.eye(m))[None] @ adjoint(E)
    f[0] = z * np.eye(m)
    el = element(ext.total, 0.5 * (f + adjoint(f)))
    w = check_witness(el, "projection", eps, el.propagation)
    return QkClass("even", w, int(z))


def suite_exactness(seed: int, eps: float, trials: int, N: int = 128) -> CheckRecord:
    def one(i):
        rng = trial_rng(seed, f"exactness/{eps}", i)
        alg = random_band_algebra(rng, max_size=6)
        ext = make_cone_extension(alg, N)
        w = random_projection_witness(alg, eps, 1.0, rng)
        c = QkClass("even", w, int(rng.integers(0, 2)))
        img = boundary_even(ext, c)
        a = exactness_probe(ext, img.cls, "ideal")
        b = exactness_probe(ext, _pulled_back_class(ext, alg, eps, rng), "total")
        return {"ok": a["pass"] and b["pass"]}

    rows = _map_trials(one, trials)
    return CheckRecord("exactness", "extension/exactness-probe", eps, trials,
                       sum(not r["ok"] for r in rows), {})


@dataclass(frozen=True)
class Suite:
    fn: Callable[..., CheckRecord]
    per_eps: bool = True
    eps_below: float = 0.25
    """Epsilons at or above this are skipped (z_loop needs < 1/20, close pairs < 1/16)."""


SUITES: dict[str, Suite] = {
    "spectrum": Suite(suite_spectrum),
    "normal_forms": Suite(suite_normal_forms),
    "product": Suite(suite_product),
    "conjugator": Suite(suite_conjugator, eps_below=0.045),
    "boundary_even": Suite(suite_boundary_even),
    "winding_anchor": Suite(suite_winding_anchor, per_eps=False),
    "round_trip": Suite(suite_round_trip),
    "toeplitz": Suite(suite_toeplitz, eps_below=0.05),
    "lipschitz": Suite(suite_lipschitz),
    "group_geometry": Suite(suite_groups, per_eps=False),
    "exactness": Suite(suite_exactness),
}


def run_suite(name: str, seed: int, epsilons, trials: int) -> list[CheckRecord]:
    suite = SUITES[name]
    if not suite.per_eps:
        return [suite.fn(seed, float(min(epsilons)), trials)]
    usable = [float(e) for e in epsilons if e < suite.eps_below]
    return [suite.fn(seed, e, trials) for e in usable]
