"""Acceptance criteria 1-12, one test each; every test prints a PASS/FAIL line."""

import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qkcalc.suites import SUITES, CheckRecord

SEED = 42
EPSILONS = (0.01, 0.05, 0.1)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def run_split(name: str, total: int, epsilons=EPSILONS) -> list[CheckRecord]:
    fn = SUITES[name].fn
    return [fn(SEED, e, t) for e, t in zip(epsilons, split(total, len(epsilons)))]


def failures(recs) -> int:
    return sum(r.failures for r in recs)


def trials(recs) -> int:
    return sum(r.trials for r in recs)


def test_criterion_01_spectrum_law():
    recs = run_split("spectrum", 1000)
    ok = failures(recs) == 0 and trials(recs) == 1000
    report(1, ok, f"{failures(recs)}/{trials(recs)} failures; eigenvalues in the two "
                  f"intervals and norm < 1+eps")
    assert ok


def test_criterion_02_normal_forms():
    recs = run_split("normal_forms", 1000)
    k0 = max(r.constants["kappa0_dist_over_eps"] for r in recs)
    k1 = max(r.constants["kappa1_dist_over_eps"] for r in recs)
    ok = failures(recs) == 0 and k0 < 2 and k1 < 1
    report(2, ok, f"{failures(recs)}/{trials(recs)} failures; max ||p-k0||/eps={k0:.3f} (<2), "
                  f"max ||u-k1||/eps={k1:.3f} (<1)")
    assert ok


def test_criterion_03_product_law():
    recs = run_split("product", 1000)
    ok = failures(recs) == 0
    report(3, ok, f"{failures(recs)}/{trials(recs)} failures at (eps(2+eps), 2r) with "
                  f"recomputed support additivity")
    assert ok


def test_criterion_04_conjugator():
    recs = run_split("conjugator", 1000, (0.01, 0.02, 0.04))
    lam = max(r.constants["lambda_emp"] for r in recs)
    ok = failures(recs) == 0 and trials(recs) == 1000
    report(4, ok, f"{failures(recs)}/{trials(recs)} propagation violations of (4n+2)r; "
                  f"lambda_emp={lam:.4f}")
    assert ok


def test_criterion_05_even_boundary():
    recs = run_split("boundary_even", 200)
    worst = max(r.constants["check_over_eps"] for r in recs)
    ok = failures(recs) == 0 and trials(recs) == 200
    report(5, ok, f"{failures(recs)}/{trials(recs)} failures; max check/eps={worst:.3f} "
                  f"against 2(2e^10+1)={2 * (2 * np.exp(10) + 1):.0f}; propagation <= l_eps r")
    assert ok


def test_criterion_06_winding_anchor():
    rec = SUITES["winding_anchor"].fn(SEED, 0.01, 1)
    ok = rec.failures == 0
    report(6, ok, "; ".join(rec.notes))
    assert ok


def test_criterion_07_loop_comparison():
    recs = run_split("round_trip", 100)
    ok = failures(recs) == 0 and trials(recs) == 100
    report(7, ok, f"{failures(recs)}/{trials(recs)} integer mismatches k1(boundary) vs k0")
    assert ok


def test_criterion_08_toeplitz():
    recs = run_split("toeplitz", 100, (0.01, 0.02, 0.04))
    c = max(r.constants["c_emp"] for r in recs)
    ok = failures(recs) == 0 and c <= 10 and trials(recs) == 100
    report(8, ok, f"{failures(recs)}/{trials(recs)} failures at N=256, |k|<=8; C_emp={c:.3f} "
                  f"(<=10)")
    assert ok


def test_criterion_09_lipschitz():
    recs = run_split("lipschitz", 30)
    lip = max(r.constants["lipschitz_estimate"] for r in recs)
    ok = failures(recs) == 0 and lip <= 2 + 1e-6
    report(9, ok, f"{failures(recs)}/{trials(recs)} failures; max Lipschitz estimate "
                  f"{lip:.6f} (<=2+1e-6); inverse homotopy samples pass (3eps, 2r)")
    assert ok


def test_criterion_10_group_geometry():
    rec = SUITES["group_geometry"].fn(SEED, 0.0, 1)
    ok = rec.failures == 0 and "s_const(Z, 1) = 9" in rec.notes
    report(10, ok, f"e_phi defect {rec.constants['e_phi_defect']:.2e}; " + "; ".join(rec.notes))
    assert ok


def test_criterion_11_exactness():
    recs = run_split("exactness", 100)
    ok = failures(recs) == 0 and trials(recs) == 100
    report(11, ok, f"{failures(recs)}/{trials(recs)} probe failures (q o j = 0 exactly; "
                   f"pulled-back boundary invariant 0)")
    assert ok


def _verify_cmd():
    exe = shutil.which("qkcalc")
    if exe:
        return [exe]
    return [sys.executable, "-m", "qkcalc.cli"]


def test_criterion_12_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run(_verify_cmd() + ["verify", "--seed", "42", "--out", str(out)],
                              capture_output=True, text=True, env=dict(os.environ))
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outs.append(((out / "report.json").read_bytes(), (out / "summary.csv").read_bytes()))
    ok = outs[0] == outs[1]
    report(12, ok, "two runs of `qkcalc verify --seed 42` give byte-identical report.json "
                   "and summary.csv" if ok else "reports differ")
    assert ok
