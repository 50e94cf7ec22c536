"""qkcalc command line: verify suites and run single constructions.

Reports contain no timestamps or timings, so they depend only on the
configuration and the code. Exit status: 0 pass, 1 check failure,
2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .algebra import (
    FiniteMetricSpace,
    band_algebra,
    element,
    load_metric_space,
    matrix_algebra,
    path_algebra,
    unitization,
)
from .controlled import boundary_even, boundary_odd, make_cone_extension, toeplitz_pair, z_loop
from .errors import ConfigError, IoError, QkError
from .groups import FreeAbelianGroup, load_group, symmetric_group
from .quantk import QkClass, check_witness, k0_invariant, k1_loop_invariant
from .suites import SUITES, rips_report, run_suite

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_EPSILONS = (0.01, 0.05, 0.1)
DEFAULT_TRIALS = 10


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 42
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    trials: int = DEFAULT_TRIALS
    suites: tuple[str, ...] = tuple(SUITES)
    out: Path = Path("qkcalc-out")
    N: int = 256
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> SuiteConfig:
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if not self.epsilons:
            raise ConfigError("at least one epsilon is required")
        for e in self.epsilons:
            if not 0 < e < 0.25:
                raise ConfigError(f"epsilon {e} is outside (0, 1/4)")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suites: {', '.join(unknown)}")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        return self


def _read_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise IoError(path, "no such file") from exc
    except OSError as exc:
        raise IoError(path, str(exc)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_config(args: argparse.Namespace) -> SuiteConfig:
    data: dict[str, Any] = {}
    base = Path(".")
    if args.config is not None:
        path = Path(args.config)
        data = _read_json(path)
        base = path.parent
    known = {"seed", "epsilons", "trials", "suites", "out", "N"}
    try:
        cfg = SuiteConfig(
            seed=int(data.get("seed", 42)),
            epsilons=tuple(float(e) for e in data.get("epsilons", DEFAULT_EPSILONS)),
            trials=int(data.get("trials", DEFAULT_TRIALS)),
            suites=tuple(data.get("suites", tuple(SUITES))),
            out=Path(data.get("out", "qkcalc-out")),
            N=int(data.get("N", 256)),
            extra={k: v for k, v in data.items() if k not in known} | {"_base": str(base)},
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value ({exc})") from exc
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.eps:
        cfg = replace(cfg, epsilons=tuple(args.eps))
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.out is not None:
        cfg = replace(cfg, out=Path(args.out))
    return cfg.validate()


# ---------------------------------------------------------------------------
# report writing


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(rows: Sequence[dict]) -> str:
    cols = ["check", "epsilon", "trials", "failures", "pass", "lambda_emp", "alpha_emp",
            "k_emp", "other_constants"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for rec in rows:
        consts = dict(rec.get("measured_constants", {}))
        w.writerow({
            "check": rec["name"],
            "epsilon": "" if rec.get("epsilon") is None else repr(rec["epsilon"]),
            "trials": rec.get("trials", 1),
            "failures": rec.get("failures", 0),
            "pass": str(rec["pass"]).lower(),
            "lambda_emp": _fmt(consts.pop("lambda_emp", None)),
            "alpha_emp": _fmt(consts.pop("alpha_emp", None)),
            "k_emp": _fmt(consts.pop("k_emp", None)),
            "other_constants": ";".join(f"{k}={_fmt(v)}" for k, v in sorted(consts.items())),
        })
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_outputs(cfg: SuiteConfig, report: dict, rows: Sequence[dict]) -> None:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "report.json").write_text(_dump(report))
        (cfg.out / "summary.csv").write_text(_csv_text(rows))
    except OSError as exc:
        raise IoError(cfg.out, str(exc)) from exc


def op_report(operation: str, anchor: str, eps: float, r: float, n: int, *, defect: float,
              propagation: float, alpha_emp: float | None, k_emp: float | None,
              inv_in: Any, inv_out: Any, passed: bool, **extra) -> dict[str, Any]:
    out = {
        "operation": operation,
        "paper_anchor": anchor,
        "inputs": {"epsilon": eps, "r": r, "n": n},
        "measured": {"defect": defect, "propagation": propagation,
                     "alpha_emp": alpha_emp, "k_emp": k_emp},
        "invariants": {"in": inv_in, "out": inv_out},
        "pass": bool(passed),
    }
    out.update(extra)
    return out


def _encode(a: np.ndarray) -> dict[str, Any]:
    a = np.asarray(a)
    return {"shape": list(a.shape), "real": a.real.round(15).tolist(),
            "imag": a.imag.round(15).tolist()}


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: SuiteConfig) -> int:
    """Run every selected suite and write report.json and summary.csv."""
    records = []
    for name in cfg.suites:
        t0 = time.perf_counter()
        recs = run_suite(name, cfg.seed, cfg.epsilons, cfg.trials)
        dt = time.perf_counter() - t0
        for rec in recs:
            records.append(rec.as_dict())
            status = "PASS" if rec.passed else "FAIL"
            print(f"{status} {name} eps={rec.epsilon} failures={rec.failures}/{rec.trials}")
        print(f"  {name}: {dt:.1f}s", file=sys.stderr)
    ok = all(r["pass"] for r in records)
    report = {"command": "verify", "seed": cfg.seed, "epsilons": list(cfg.epsilons),
              "trials": cfg.trials, "checks": records, "pass": ok}
    write_outputs(cfg, report, records)
    return EXIT_PASS if ok else EXIT_FAIL


def _algebra_from_spec(spec: dict, base: Path):
    kind = spec.get("kind", "matrix")
    if kind == "matrix":
        return matrix_algebra(int(spec.get("n", 1)))
    if kind == "band":
        if "metric_space" in spec:
            space = load_metric_space(base / spec["metric_space"])
        elif "line" in spec:
            space = FiniteMetricSpace.line(int(spec["line"]))
        else:
            raise ConfigError("band algebra needs 'metric_space' or 'line'")
        return band_algebra(space, int(spec.get("block_dim", 1)))
    raise ConfigError(f"unknown algebra kind {kind!r}")


def _matrix_from_spec(spec: dict) -> np.ndarray:
    try:
        re = np.asarray(spec["matrix"], dtype=float)
        im = np.asarray(spec.get("imag", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad witness matrix ({exc})") from exc
    if re.shape != im.shape or re.ndim != 2:
        raise ConfigError("witness matrix must be a square real/imag pair")
    return re + 1j * im


def cmd_boundary(cfg: SuiteConfig) -> int:
    """Boundary of an even class given in the config, or of a winding loop."""
    spec = cfg.extra.get("class", {"algebra": {"kind": "matrix", "n": 1}, "matrix": [[1.0]],
                                   "rank_offset": 0})
    base = Path(cfg.extra["_base"])
    eps = float(spec.get("eps", cfg.epsilons[0]))
    r = float(spec.get("r", 1.0))
    if spec.get("kind") == "loop":
        return _boundary_loop(cfg, spec, eps)
    alg = _algebra_from_spec(spec.get("algebra", {}), base)
    p = _matrix_from_spec(spec)
    if p.shape != (alg.size, alg.size):
        raise ConfigError(f"witness is {p.shape}, algebra needs {(alg.size, alg.size)}")
    w = check_witness(element(alg, p), "projection", eps, r)
    c = QkClass("even", w, int(spec.get("rank_offset", 0)))
    res = boundary_even(make_cone_extension(alg, cfg.N), c)
    L = res.cutoff
    budget_ok = res.propagation <= L * r
    inv_in, inv_out = k0_invariant(c), k1_loop_invariant(res.cls)
    report = op_report(
        "boundary_even", "even-boundary/truncated-exponential", eps, r, alg.size,
        defect=res.defect, propagation=res.propagation, alpha_emp=res.alpha_emp,
        k_emp=res.k_emp, inv_in=inv_in, inv_out=inv_out,
        passed=budget_ok and inv_in == inv_out,
        check_value=res.check_value, propagation_budget=L * r, cutoff=L,
        representative=_encode(res.cls.representative.matrix),
    )
    rec = {"name": "boundary_even", "epsilon": eps, "trials": 1,
           "failures": 0 if report["pass"] else 1, "pass": report["pass"],
           "measured_constants": {"alpha_emp": res.alpha_emp, "k_emp": res.k_emp}}
    write_outputs(cfg, report, [rec])
    print(f"{'PASS' if report['pass'] else 'FAIL'} boundary_even winding {inv_out} "
          f"(k0 {inv_in}), propagation {res.propagation} <= {L * r}")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def _boundary_loop(cfg: SuiteConfig, spec: dict, eps: float) -> int:
    k = int(spec.get("winding", 1))
    N1 = int(spec.get("samples", 48))
    A = unitization(path_algebra(matrix_algebra(1), N1, (True, True)))
    ts = A.sample_times[0]
    u = np.exp(2j * np.pi * k * ts)[:, None, None]
    u[0] = u[-1] = 1.0
    w = check_witness(element(A, u), "unitary", eps, 0.0)
    res = boundary_odd(make_cone_extension(A, int(spec.get("cone_samples", 48))),
                       QkClass("odd", w))
    inv = k0_invariant(res.cls)
    report = op_report(
        "boundary_odd", "odd-boundary/lift-and-compress", eps, 0.0, 1,
        defect=res.defect, propagation=res.propagation, alpha_emp=res.alpha_emp,
        k_emp=None, inv_in=k, inv_out=inv, passed=inv == -k,
        lift_pieces=res.lift.pieces, lift_cutoff=res.lift.cutoff,
        lift_quotient_error=res.lift.quotient_error,
    )
    rec = {"name": "boundary_odd", "epsilon": eps, "trials": 1,
           "failures": 0 if report["pass"] else 1, "pass": report["pass"],
           "measured_constants": {"alpha_emp": res.alpha_emp}}
    write_outputs(cfg, report, [rec])
    print(f"{'PASS' if report['pass'] else 'FAIL'} boundary_odd winding {k} -> index {inv}")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def _suite_command(cfg: SuiteConfig, name: str, operation: str) -> int:
    recs = [r.as_dict() for r in run_suite(name, cfg.seed, cfg.epsilons, cfg.trials)]
    if not recs:
        raise ConfigError(f"no epsilon in {list(cfg.epsilons)} is usable for {name}")
    ok = all(r["pass"] for r in recs)
    report = {"command": operation, "seed": cfg.seed, "trials": cfg.trials,
              "checks": recs, "pass": ok}
    write_outputs(cfg, report, recs)
    for r in recs:
        consts = ", ".join(f"{k}={v:.4g}" for k, v in r["measured_constants"].items())
        print(f"{'PASS' if r['pass'] else 'FAIL'} {name} eps={r['epsilon']} {consts}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_conjugate(cfg: SuiteConfig) -> int:
    """Empirical conjugator constants over random projection pairs."""
    return _suite_command(cfg, "conjugator", "conjugate")


def cmd_toeplitz(cfg: SuiteConfig) -> int:
    """Toeplitz pairing of z_loop classes, a suite or one configured class."""
    spec = cfg.extra.get("class")
    if spec is None:
        return _suite_command(cfg, "toeplitz", "toeplitz")
    base = Path(cfg.extra["_base"])
    eps = float(spec.get("eps", cfg.epsilons[0]))
    r = float(spec.get("r", 1.0))
    alg = _algebra_from_spec(spec.get("algebra", {}), base)
    w = check_witness(element(alg, _matrix_from_spec(spec)), "projection", eps, r)
    k = int(spec.get("k", 0))
    c = z_loop(w, k, cfg.N)
    res = toeplitz_pair(c, cfg.N)
    report = op_report(
        "toeplitz_pair", "toeplitz-extension/morita-pairing", eps, r, alg.size,
        defect=res.defect, propagation=res.propagation, alpha_emp=res.c_emp,
        k_emp=res.propagation / r if r else None, inv_in=k1_loop_invariant(c),
        inv_out=res.invariant, passed=res.passes, window=res.N, bandwidth=res.bandwidth,
        distance=res.distance,
    )
    rec = {"name": "toeplitz_pair", "epsilon": eps, "trials": 1,
           "failures": 0 if res.passes else 1, "pass": res.passes,
           "measured_constants": {"alpha_emp": res.c_emp}}
    write_outputs(cfg, report, [rec])
    print(f"{'PASS' if res.passes else 'FAIL'} toeplitz_pair invariant {res.invariant}")
    return EXIT_PASS if res.passes else EXIT_FAIL


def _group_from_spec(spec, base: Path):
    if isinstance(spec, str):
        return load_group(base / spec)
    kind = spec.get("type", "Z^d")
    if kind == "S3":
        return symmetric_group(3)
    if kind == "Z^d":
        return FreeAbelianGroup(int(spec.get("rank", 1)))
    raise ConfigError(f"unknown group type {kind!r}")


def cmd_rips(cfg: SuiteConfig) -> int:
    """Rips complexes of a group, the cutoff partition and the e_phi check."""
    base = Path(cfg.extra["_base"])
    group = _group_from_spec(cfg.extra.get("group", {"type": "Z^d", "rank": 1}), base)
    d = float(cfg.extra.get("d", 1))
    window = cfg.extra.get("window")
    rep = rips_report(group, d, None if window is None else float(window))
    ok = rep["e_phi_defect"] <= 1e-10 and rep["e_phi_propagation"] <= rep["s_const"]
    report = {k: rep[k] for k in ("d", "vertex_count", "s_const", "e_phi_defect",
                                  "e_phi_propagation")}
    report.update({"operation": "rips", "paper_anchor": "rips-complex/cutoff-projection",
                   "group": group.describe(), "pass": ok})
    rec = {"name": "rips", "epsilon": None, "trials": 1, "failures": 0 if ok else 1,
           "pass": ok, "measured_constants": {"e_phi_defect": rep["e_phi_defect"]}}
    write_outputs(cfg, report, [rec])
    print(_dump(report), end="")
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {
    "verify": cmd_verify,
    "boundary": cmd_boundary,
    "conjugate": cmd_conjugate,
    "rips": cmd_rips,
    "toeplitz": cmd_toeplitz,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="suite seed (default 42)")
    common.add_argument("--eps", type=float, action="append", default=None,
                        help="epsilon; repeat for several (default 0.01 0.05 0.1)")
    common.add_argument("--trials", type=int, default=None, help="trials per suite and epsilon")
    common.add_argument("--out", default=None, help="output directory for report.json/summary.csv")
    common.add_argument("--config", default=None, help="JSON configuration file")
    parser = argparse.ArgumentParser(prog="qkcalc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, IoError) as exc:
        print(f"qkcalc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QkError as exc:
        print(f"qkcalc: check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
