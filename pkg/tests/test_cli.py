import csv
import json

import pytest

from tipcouple import sweep as sw
from tipcouple.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, main
from tipcouple.configs import named_scene
from tipcouple.scene import scene_to_dict


def write_json(path, tree):
    path.write_text(json.dumps(tree))
    return str(path)


@pytest.fixture
def small_vacuum(tmp_path):
    tree = scene_to_dict(named_scene("vacuum"))
    tree["domain"].update(extents=[1.24, 1.24, 1.24], grid_step=0.031)
    tree["source"]["position"] = [0.62, 0.62, 0.62]
    tree["source"]["ramp_cycles"] = 5.0
    tree["monitors"]["plane_z"] = 0.9
    return write_json(tmp_path / "vacuum.json", tree)


class TestValidate:
    def test_builtin_prints_v_number(self, capsys):
        assert main(["validate", "snt_alone_p2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "V = 4.62 (multi-mode)" in out
        assert "CFL dt" in out and "cells" in out

    def test_zero_radius(self, capsys):
        rc = main(["validate", "snt_alone_p2", "--set", "primitives.0.radius=0"])
        assert rc == EXIT_CONFIG

    def test_unknown_key_named(self, capsys):
        rc = main(["validate", "snt_alone_p2", "--set", "primitives.0.radiuss=0.3"])
        assert rc == EXIT_CONFIG
        assert "radiuss" in capsys.readouterr().err

    def test_unreadable_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_CONFIG
        assert "cannot read" in capsys.readouterr().err

    def test_bad_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["validate", str(bad)]) == EXIT_CONFIG
        assert "not valid JSON" in capsys.readouterr().err


class TestThreads:
    def test_zero_threads_flag(self, small_vacuum):
        assert main(["run", small_vacuum, "--threads", "0"]) == EXIT_CONFIG

    def test_zero_threads_env(self, small_vacuum, monkeypatch, capsys):
        monkeypatch.setenv("TIPCOUPLE_THREADS", "0")
        assert main(["run", small_vacuum]) == EXIT_CONFIG
        assert "at least 1" in capsys.readouterr().err


def test_run_vacuum(small_vacuum, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", small_vacuum, "--threads", "1", "--out", str(out)]) == EXIT_OK
    rec = json.loads((out / "report.json").read_text())
    assert rec["purcell_ratio"] == pytest.approx(1.0, abs=0.02)
    assert rec["converged"] is True
    assert "purcell = " in capsys.readouterr().out


class TestModes:
    def test_table_and_csv(self, tmp_path, capsys):
        path = tmp_path / "modes.csv"
        assert main(["modes", "--radius", "0.2", "--csv", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "single-mode" in out and "HE11a" in out
        rows = list(csv.DictReader(path.open()))
        assert [r["mode"] for r in rows] == ["HE11a", "HE11b"]
        assert 1.0 < float(rows[0]["n_eff"]) < 1.457

    def test_bad_radius(self):
        assert main(["modes", "--radius", "-1"]) == EXIT_CONFIG


class TestSweep:
    def test_out_of_range_spec(self, tmp_path, capsys):
        spec = dict(name="far", case_id="case4", axis="d", start=0.05, stop=0.9, step=0.05,
                    a=0.43, b_D=0.43)
        path = write_json(tmp_path / "s.json", spec)
        assert main(["sweep", "--spec", path, "--out", str(tmp_path / "r")]) == EXIT_CONFIG
        assert "extend" in capsys.readouterr().err

    def test_unknown_spec_field(self, tmp_path):
        spec = dict(name="x", case_id="case4", axis="d", start=0.1, stop=0.2, step=0.05,
                    colour="red")
        path = write_json(tmp_path / "s.json", spec)
        assert main(["sweep", "--spec", path]) == EXIT_CONFIG

    def test_unknown_name(self):
        assert main(["sweep", "case99"]) == EXIT_CONFIG


def fake_rows(desc, threads):
    rec = dict(eta_flux=0.5 - abs(desc.axis_value - 0.23), eta_modal=0.4, P_total=1.0,
               purcell_ratio=1.1, converged=True)

    class R:
        def to_record(self):
            return rec

    return sw._row_from_report(desc, R())


class TestReport:
    def test_empty_dir(self, tmp_path, capsys):
        assert main(["report", str(tmp_path)]) == EXIT_MISSING
        assert main(["report", str(tmp_path / "absent")]) == EXIT_MISSING

    def test_missing_sweep(self, tmp_path, capsys):
        s = sw.get_sweep("case4_p2_d")
        sw.execute(s, sw.sweep_dir(tmp_path, s.name), runner=fake_rows)
        assert main(["report", str(tmp_path), "--figure", "fig2d"]) == EXIT_MISSING
        assert "case3_p2_d" in capsys.readouterr().err

    def test_figure_and_table(self, tmp_path, capsys):
        for name in ("case4_p2_d", "case3_p2_d"):
            s = sw.get_sweep(name)
            sw.execute(s, sw.sweep_dir(tmp_path, s.name), runner=fake_rows)
        out = tmp_path / "fig.csv"
        assert main(["report", str(tmp_path), "--figure", "fig2d", "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert list(rows[0]) == sw.FIGURE_COLUMNS
        assert {r["case"] for r in rows} == {"case3", "case4"}
        text = capsys.readouterr().out
        assert "Case 4 P2" in text and "Case 3 P2" in text
        assert "d = 0.23" in text
