"""End-to-end checks of the command-line front end.

Everything runs in-process through cli.main so exit codes and artifacts
are observable without spawning interpreters.
"""

import json

import numpy as np
import pytest

from gpcsim import cli
from gpcsim.cli import main, report_costs, resolve_netlist
from gpcsim.collocation import SelectionError
from gpcsim.engine import DcConvergenceError, TransientError
from gpcsim.post import read_stats_csv

CONFLICT = """\
* parallel sources disagree
v1 a 0 1
v2 a 0 2
r1 a b dist=uniform(900, 1100)
r2 b 0 1k
.dc
"""


def run_cli(*args):
    return main(list(args))


# --------------------------------------------------------------------------
# exit codes
# --------------------------------------------------------------------------

class TestExitCodes:
    def test_success_is_zero(self, tmp_path, capsys):
        assert run_cli("dc", "cs_amp.cir", "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "method=st" in out and "manifest.json" in out

    def test_unparseable_netlist_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cir"
        bad.write_text("title\nr1 1 0 notanumber\n")
        assert run_cli("dc", str(bad), "--out", str(tmp_path)) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_netlist_is_2(self, tmp_path):
        assert run_cli("dc", "no_such_file.cir", "--out", str(tmp_path)) == 2

    def test_samples_flag_requires_mc(self, tmp_path):
        assert run_cli("dc", "cs_amp.cir", "--samples", "10",
                       "--out", str(tmp_path)) == 2

    def test_ac_requires_st(self, tmp_path):
        assert run_cli("ac", "rc_uniform.cir", "--method", "sg",
                       "--out", str(tmp_path)) == 2

    def test_missing_analysis_card_is_2(self, tmp_path, capsys):
        # diode_dc.cir declares .dc and .dcsweep but no .tran
        assert run_cli("tran", "diode_dc.cir", "--out", str(tmp_path)) == 2
        assert ".tran" in capsys.readouterr().err

    def test_deterministic_netlist_is_2(self, tmp_path):
        det = tmp_path / "det.cir"
        det.write_text("* fixed\nv1 1 0 1\nr1 1 0 1k\n.dc\n")
        assert run_cli("dc", str(det), "--out", str(tmp_path)) == 2

    def test_dc_failure_is_3(self, tmp_path, capsys):
        bad = tmp_path / "conflict.cir"
        bad.write_text(CONFLICT)
        assert run_cli("dc", str(bad), "--out", str(tmp_path)) == 3
        assert "operating point" in capsys.readouterr().err

    def test_transient_failure_is_4(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise TransientError("step size collapsed at t=1e-6")

        monkeypatch.setattr(cli, "run_analysis", boom)
        assert run_cli("tran", "rc_uniform.cir", "--out", str(tmp_path)) == 4

    def test_selection_failure_is_5(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise SelectionError(12, 35, 1e-6)

        monkeypatch.setattr(cli, "run_analysis", boom)
        assert run_cli("dc", "cs_amp.cir", "--out", str(tmp_path)) == 5

    def test_nested_dc_failure_keeps_code_3(self, tmp_path, monkeypatch):
        # a transient whose stochastic DC initialization diverges is still
        # an operating-point failure
        def boom(*args, **kwargs):
            raise DcConvergenceError("[method=st nominal init] no convergence")

        monkeypatch.setattr(cli, "run_analysis", boom)
        assert run_cli("tran", "rc_uniform.cir", "--out", str(tmp_path)) == 3


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

class TestArtifacts:
    def test_manifest_basis_identity(self, tmp_path):
        assert run_cli("dc", "cs_amp.cir", "--method", "st", "--order", "3",
                       "--out", str(tmp_path)) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["basis_size"] == 35          # l=4, p=3
        assert manifest["node_count"] == 35
        assert manifest["method"] == "st"
        assert manifest["analysis"] == "dc"
        assert manifest["random_parameters"] == 4
        assert manifest["cond_phi"] > 1.0
        assert 0.0 < manifest["beta"] < 1.0
        assert manifest["newton_iterations"] >= 1
        assert manifest["wall_time_s"] > 0.0

    def test_sc_run_count(self, tmp_path):
        assert run_cli("dc", "lna.cir", "--method", "sc", "--order", "2",
                       "--out", str(tmp_path)) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["node_count"] == 27          # (p+1)^l = 3^3
        assert manifest["basis_size"] == 10
        assert manifest["cond_phi"] is None

    def test_stats_csv_shape(self, tmp_path):
        run_cli("dcsweep", "diode_dc.cir", "--order", "2", "--out", str(tmp_path))
        series = read_stats_csv(tmp_path / "stats.csv")
        assert len(series.times) == 21               # 0..1 in 0.05 steps
        assert all(n.startswith(("v(", "i(")) for n in series.names)
        assert np.all(series.std >= 0)

    def test_mc_single_sample_is_nominal(self, tmp_path):
        mc_dir = tmp_path / "mc"
        st_dir = tmp_path / "st"
        assert run_cli("tran", "rc_uniform.cir", "--method", "mc",
                       "--order", "0", "--samples", "1",
                       "--fixed-step", "4e-5", "--out", str(mc_dir)) == 0
        assert run_cli("tran", "rc_uniform.cir", "--method", "st",
                       "--order", "0", "--fixed-step", "4e-5",
                       "--out", str(st_dir)) == 0
        mc = read_stats_csv(mc_dir / "stats.csv")
        st = read_stats_csv(st_dir / "stats.csv")
        assert np.allclose(mc.mean, st.mean, atol=1e-12)
        assert np.all(mc.std == 0.0)                 # one sample: no spread
        manifest = json.loads((mc_dir / "manifest.json").read_text())
        assert manifest["node_count"] == 1
        assert manifest["seed"] == 0

    def test_ac_artifacts(self, tmp_path):
        assert run_cli("ac", "rc_uniform.cir", "--order", "4",
                       "--out", str(tmp_path)) == 0
        series = read_stats_csv(tmp_path / "stats.csv")
        assert np.all(np.diff(series.times) > 0)     # frequency axis
        assert np.all(np.isfinite(series.mean))
        payload = json.loads((tmp_path / "coefficients.json").read_text())
        assert "frequencies" in payload
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["time_points"] == len(series.times)

    def test_format_flag_selects_artifacts(self, tmp_path):
        csv_dir = tmp_path / "csvonly"
        run_cli("dc", "cs_amp.cir", "--format", "csv", "--out", str(csv_dir))
        assert (csv_dir / "stats.csv").exists()
        assert not (csv_dir / "coefficients.json").exists()
        assert (csv_dir / "manifest.json").exists()
        json_dir = tmp_path / "jsononly"
        run_cli("dc", "cs_amp.cir", "--format", "json", "--out", str(json_dir))
        assert not (json_dir / "stats.csv").exists()
        assert (json_dir / "coefficients.json").exists()

    def test_byte_determinism(self, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert run_cli("tran", "rc_uniform.cir", "--method", "mc",
                           "--samples", "40", "--seed", "42",
                           "--fixed-step", "4e-5", "--out", str(d)) == 0
        a, b = dirs
        assert (a / "stats.csv").read_bytes() == (b / "stats.csv").read_bytes()
        assert (a / "coefficients.json").read_bytes() == \
            (b / "coefficients.json").read_bytes()

    def test_jobs_flag_matches_serial(self, tmp_path):
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        for d, jobs in ((serial, "1"), (parallel, "3")):
            assert run_cli("dc", "lna.cir", "--method", "sc", "--order", "2",
                           "--jobs", jobs, "--out", str(d)) == 0
        assert (serial / "stats.csv").read_bytes() == \
            (parallel / "stats.csv").read_bytes()

    def test_shipped_netlist_resolution(self):
        text = resolve_netlist("cs_amp.cir").read_text()
        assert "m1" in text
        with pytest.raises(cli.ConfigError):
            resolve_netlist("definitely_not_shipped.cir")


# --------------------------------------------------------------------------
# cost report
# --------------------------------------------------------------------------

def fake_manifest(method, nodes, wall, order=6, sha="abc", analysis="dc",
                  steps=0):
    return {
        "netlist": "bench.cir",
        "netlist_sha256": sha,
        "analysis": analysis,
        "method": method,
        "order": order,
        "node_count": nodes,
        "wall_time_s": wall,
        "steps_accepted": steps,
    }


class TestReportCosts:
    def test_single_manifest_unit_ratios(self):
        rows = report_costs([fake_manifest("st", 210, 2.0)])
        assert rows[0]["node_ratio"] == 1.0
        assert rows[0]["time_ratio"] == 1.0
        assert rows[0]["kappa"] == 1.0

    def test_node_ratio_is_exact(self):
        # p=6, l=4: basis size 210, tensor grid 7^4 = 2401
        rows = report_costs([
            fake_manifest("st", 210, 1.0),
            fake_manifest("sc", 2401, 9.0),
        ])
        assert rows[1]["node_ratio"] == 2401 / 210
        assert rows[1]["time_ratio"] == 9.0
        assert rows[1]["kappa"] == pytest.approx(9.0 / (2401 / 210))

    def test_baseline_is_st_even_when_not_first(self):
        rows = report_costs([
            fake_manifest("sc", 2401, 9.0),
            fake_manifest("st", 210, 1.0),
        ])
        assert rows[0]["node_ratio"] == 2401 / 210
        assert rows[1]["node_ratio"] == 1.0

    def test_transient_kappa_decomposition(self):
        st = fake_manifest("st", 35, 2.0, order=3, analysis="tran", steps=120)
        sc = fake_manifest("sc", 256, 60.0, order=3, analysis="tran", steps=2000)
        rows = report_costs([st, sc])
        nu = rows[1]["time_ratio"]
        assert nu == pytest.approx(rows[1]["node_ratio"] * rows[1]["kappa"])
        assert rows[1]["kappa"] > 1.0               # fewer adaptive steps paid off

    def test_mismatched_netlists_error(self):
        with pytest.raises(ValueError, match="mix netlists"):
            report_costs([fake_manifest("st", 210, 1.0, sha="abc"),
                          fake_manifest("sc", 2401, 9.0, sha="def")])

    def test_mixed_analysis_error(self):
        with pytest.raises(ValueError, match="mix analyses"):
            report_costs([fake_manifest("st", 210, 1.0, analysis="dc"),
                          fake_manifest("sc", 2401, 9.0, analysis="tran")])

    def test_report_command_roundtrip(self, tmp_path, capsys):
        st_dir = tmp_path / "st"
        sc_dir = tmp_path / "sc"
        run_cli("dc", "lna.cir", "--method", "st", "--order", "2",
                "--out", str(st_dir))
        run_cli("dc", "lna.cir", "--method", "sc", "--order", "2",
                "--out", str(sc_dir))
        capsys.readouterr()
        assert run_cli("report", str(st_dir / "manifest.json"),
                       str(sc_dir / "manifest.json")) == 0
        out = capsys.readouterr().out
        assert "kappa" in out
        assert "2.7" in out                          # 27/10 node ratio

    def test_report_mismatch_exits_2(self, tmp_path, capsys):
        st_dir = tmp_path / "st"
        other = tmp_path / "other"
        run_cli("dc", "lna.cir", "--out", str(st_dir))
        run_cli("dc", "cs_amp.cir", "--out", str(other))
        capsys.readouterr()
        assert run_cli("report", str(st_dir / "manifest.json"),
                       str(other / "manifest.json")) == 2
