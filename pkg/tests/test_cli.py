import csv
import json

import numpy as np
import pytest

from qkcalc import cli
from qkcalc.algebra import FiniteMetricSpace, band_algebra


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = cli.main(argv)
    rep = tmp_path / "out" / "report.json"
    return code, (json.loads(rep.read_text()) if rep.exists() else None)


def decode(obj):
    return np.asarray(obj["real"]) + 1j * np.asarray(obj["imag"])


class TestConfigErrors:
    def test_zero_trials(self, tmp_path, capsys):
        code, _ = run(tmp_path, "verify", "--trials", "0")
        assert code == 2 and "trials" in capsys.readouterr().err

    @pytest.mark.parametrize("eps", ["0.25", "0", "-0.1"])
    def test_epsilon_range(self, tmp_path, eps):
        assert run(tmp_path, "verify", "--eps", eps)[0] == 2

    def test_missing_config(self, tmp_path, capsys):
        code = cli.main(["verify", "--config", str(tmp_path / "absent.json")])
        assert code == 2 and "absent.json" in capsys.readouterr().err

    def test_unknown_algebra_file(self, tmp_path, capsys):
        cfg = {"class": {"algebra": {"kind": "band", "metric_space": "nowhere.json"},
                         "matrix": [[1.0]]}}
        code, _ = run(tmp_path, "boundary", config=cfg)
        assert code == 2 and "nowhere.json" in capsys.readouterr().err

    def test_unknown_suite(self, tmp_path):
        assert run(tmp_path, "verify", config={"suites": ["nope"]})[0] == 2

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["verify", "--config", str(p)]) == 2


class TestBoundary:
    def test_default_is_rank_one_over_c(self, tmp_path):
        code, rep = run(tmp_path, "boundary")
        assert code == 0
        assert rep["operation"] == "boundary_even"
        assert rep["invariants"] == {"in": 1, "out": 1}
        assert rep["paper_anchor"]
        assert decode(rep["representative"]).shape == tuple(rep["representative"]["shape"])

    def test_band_projection_from_file(self, tmp_path):
        (tmp_path / "line.json").write_text(json.dumps(
            {"points": 4, "distances": FiniteMetricSpace.line(4).distances.tolist()}))
        p = np.zeros((4, 4))
        p[0, 0] = p[0, 1] = p[1, 0] = p[1, 1] = 0.5
        p[3, 3] = 1.0
        cfg = {"class": {"algebra": {"kind": "band", "metric_space": "line.json"},
                         "matrix": p.tolist(), "eps": 0.05, "r": 1.0},
               "N": 64}
        code, rep = run(tmp_path, "boundary", config=cfg)
        assert code == 0
        assert rep["propagation_budget"] == rep["cutoff"] * 1.0
        # recompute the support of the emitted representative
        rep_m = decode(rep["representative"])
        d = band_algebra(FiniteMetricSpace.line(4)).index_distances
        mask = (np.abs(rep_m) > 1e-14).any(axis=0)
        assert float(d[mask].max(initial=0.0)) == rep["measured"]["propagation"]
        assert rep["measured"]["propagation"] <= rep["propagation_budget"]
        assert rep["invariants"]["out"] == 2

    def test_malformed_witness(self, tmp_path, capsys):
        cfg = {"class": {"matrix": [[0.5]], "eps": 0.1}}
        code, _ = run(tmp_path, "boundary", config=cfg)
        err = capsys.readouterr().err
        assert code == 1 and "defect 2.5" in err

    def test_loop_class(self, tmp_path):
        cfg = {"class": {"kind": "loop", "winding": 2, "eps": 0.01}}
        code, rep = run(tmp_path, "boundary", config=cfg)
        assert code == 0 and rep["invariants"] == {"in": 2, "out": -2}


class TestOtherCommands:
    def test_rips(self, tmp_path, capsys):
        code, rep = run(tmp_path, "rips", config={"group": {"type": "Z^d", "rank": 1}, "d": 1})
        assert code == 0
        for key in ("d", "vertex_count", "s_const", "e_phi_defect", "e_phi_propagation"):
            assert key in rep
        assert rep["s_const"] == 9
        assert json.loads(capsys.readouterr().out)["s_const"] == 9

    def test_rips_table_file(self, tmp_path):
        (tmp_path / "z3.json").write_text(json.dumps(
            {"order": 3, "generators": [1], "table": [[0, 1, 2], [1, 2, 0], [2, 0, 1]]}))
        code, rep = run(tmp_path, "rips", config={"group": "z3.json", "d": 1})
        assert code == 0 and rep["e_phi_defect"] <= 1e-10

    def test_conjugate(self, tmp_path):
        code, rep = run(tmp_path, "conjugate", "--trials", "3", "--eps", "0.01")
        assert code == 0
        assert "lambda_emp" in rep["checks"][0]["measured_constants"]

    def test_conjugate_without_usable_eps(self, tmp_path):
        assert run(tmp_path, "conjugate", "--eps", "0.2")[0] == 2

    def test_toeplitz_class(self, tmp_path):
        cfg = {"class": {"matrix": [[1.0, 0.0], [0.0, 0.0]], "k": 2,
                         "algebra": {"kind": "matrix", "n": 2}}, "N": 128}
        code, rep = run(tmp_path, "toeplitz", config=cfg)
        assert code == 0
        assert rep["invariants"]["in"] == rep["invariants"]["out"] == 1 - 2


class TestVerifyReports:
    CFG = {"suites": ["spectrum", "product", "group_geometry"], "epsilons": [0.01, 0.1],
           "trials": 3}

    def test_csv_rows(self, tmp_path):
        code, rep = run(tmp_path, "verify", config=self.CFG)
        assert code == 0 and rep["pass"]
        rows = list(csv.DictReader((tmp_path / "out" / "summary.csv").open()))
        keys = [(r["check"], r["epsilon"]) for r in rows]
        assert keys == [("spectrum", "0.01"), ("spectrum", "0.1"), ("product", "0.01"),
                        ("product", "0.1"), ("group_geometry", "")]
        assert len(set(keys)) == len(keys)

    def test_records_carry_anchor_and_no_timing(self, tmp_path):
        _, rep = run(tmp_path, "verify", config=self.CFG)
        for rec in rep["checks"]:
            assert rec["paper_anchor"] and "runtime" not in rec
            assert rec["pass"] == (rec["failures"] == 0)

    def test_flags_override_config(self, tmp_path):
        _, rep = run(tmp_path, "verify", "--seed", "7", "--trials", "2", config=self.CFG)
        assert rep["seed"] == 7 and rep["trials"] == 2

    def test_repeatable(self, tmp_path):
        run(tmp_path, "verify", config=self.CFG)
        first = (tmp_path / "out" / "report.json").read_bytes()
        run(tmp_path, "verify", config=self.CFG)
        assert (tmp_path / "out" / "report.json").read_bytes() == first
