import json
import subprocess
import sys

import numpy as np
import pytest

from broken_sobolev.cli import main


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse rejects bad arguments this way
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def _csv_rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


class TestMesh:
    def test_gen_and_info(self, tmp_path, capsys):
        code, out, _ = run(["mesh", "gen", "--kind", "unit-square", "--n", "2", "-o", str(tmp_path / "sq")], capsys)
        assert code == 0
        assert json.loads(out)["cells"] == 8
        code, out, _ = run(["mesh", "info", str(tmp_path / "sq")], capsys)
        info = json.loads(out)
        assert code == 0
        assert info["K"] == pytest.approx(1 + np.sqrt(2))
        assert info["area"] == pytest.approx(1.0)

    def test_convert_round_trip(self, tmp_path, capsys):
        run(["mesh", "gen", "--kind", "lshape", "--n", "1", "--levels", "1", "-o", str(tmp_path / "l.json")], capsys)
        assert run(["mesh", "convert", str(tmp_path / "l.json"), str(tmp_path / "l")], capsys)[0] == 0
        _, a, _ = run(["mesh", "info", str(tmp_path / "l.json")], capsys)
        _, b, _ = run(["mesh", "info", str(tmp_path / "l.node")], capsys)
        assert json.loads(a)["hash"] == json.loads(b)["hash"]

    def test_bad_factor_is_argument_error(self, tmp_path, capsys):
        code, _, err = run(["mesh", "gen", "--kind", "degenerate", "--factor", "0", "-o", str(tmp_path / "d")], capsys)
        assert code == 2
        assert "positive" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["mesh", "info", str(tmp_path / "nothing")], capsys)
        assert code == 1
        assert json.loads(err.strip().splitlines()[-1])["error"] == "FileNotFoundError"

    def test_broken_mesh_file(self, tmp_path, capsys):
        (tmp_path / "b.node").write_text("3 2 0 0\n0 0 0\n1 1 0\n2 0 1\n")
        (tmp_path / "b.ele").write_text("1 3 0\n0 0 1 9\n")
        code, _, err = run(["mesh", "info", str(tmp_path / "b")], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "ParseError"


class TestConstants:
    def test_trace_family(self, capsys):
        code, out, _ = run(["constants", "trace", "--family", "red:square2:levels=0..1"], capsys)
        assert code == 0
        header, rows = _csv_rows(out)
        assert header[:3] == ["level", "cells", "K"]
        assert float(rows[0][header.index("constant")]) == pytest.approx(4.2603052819470415, rel=1e-8)
        assert out.rstrip().splitlines()[-1].startswith("# version=0.1.0, seed=0, config-hash=")

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("BROKEN_SOBOLEV_SEED", "7")
        _, out, _ = run(["constants", "trace", "--family", "red:square2:levels=0..0"], capsys)
        assert "seed=7," in out.splitlines()[-1]

    def test_poincare_needs_seminorm(self, capsys):
        code, _, _ = run(["constants", "poincare", "--family", "red:square2:levels=0..0"], capsys)
        assert code == 2

    def test_empty_region(self, capsys):
        code, _, err = run(["constants", "poincare", "--family", "red:square2:levels=0..0", "--seminorm", "f3:empty"], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "EmptyRegion"

    def test_single_mesh(self, tmp_path, capsys):
        run(["mesh", "gen", "--kind", "unit-square", "--n", "2", "-o", str(tmp_path / "m")], capsys)
        code, out, _ = run(["constants", "strip", "--mesh", str(tmp_path / "m"), "--delta", "0.25",
                            "-o", str(tmp_path / "s.csv")], capsys)
        assert code == 0
        header, rows = _csv_rows((tmp_path / "s.csv").read_text())
        assert len(rows) == 1

    def test_family_and_mesh_exclusive(self, capsys):
        assert run(["constants", "trace"], capsys)[0] == 2

    def test_bad_family(self, capsys):
        assert run(["constants", "trace", "--family", "red:disk:levels=0"], capsys)[0] == 2


class TestOtherCommands:
    def test_fields_strip_lshape(self, capsys):
        code, out, _ = run(["fields", "strip", "--domain", "lshape", "--delta", "0.1"], capsys)
        assert code == 0
        rep = json.loads(out)
        assert rep["decomposition"]["sectors"] == 1
        assert rep["report"]["div_error"] < 1e-10

    def test_fields_too_wide(self, capsys):
        code, _, err = run(["fields", "strip", "--domain", "lshape", "--delta", "0.9"], capsys)
        assert code == 1
        assert json.loads(err)["error"] == "StripTooWide"

    def test_shift_constant_function(self, capsys):
        code, out, _ = run(["shift", "--family", "red:square2:levels=0..0", "--sizes", "0.1",
                            "--direction", "1,0", "--function", "one"], capsys)
        assert code == 0
        header, rows = _csv_rows(out)
        assert float(rows[0][header.index("shift_l2_sq")]) == pytest.approx(0.2)

    def test_shift_zero_direction(self, capsys):
        assert run(["shift", "--direction", "0,0"], capsys)[0] == 2

    def test_zigzag(self, capsys):
        code, out, _ = run(["zigzag", "--family", "red:lshape1:levels=0..1", "--lines", "5"], capsys)
        assert code == 0
        header, rows = _csv_rows(out)
        assert len(rows) == 10
        i, b = header.index("interior_path_sum"), header.index("bound")
        assert all(float(r[i]) <= float(r[b]) for r in rows)

    def test_suite_subset(self, tmp_path, capsys):
        code, out, _ = run(["suite", str(tmp_path), "--only", "1"], capsys)
        assert code == 0
        assert out.startswith("[PASS] criterion 1")
        summary = json.loads((tmp_path / "summary.json").read_text())
        (entry,) = summary["criteria"]
        assert entry["criterion"] == 1 and entry["status"] == "PASS"
        assert (tmp_path / "criterion1_exactness-oracle.csv").exists()

    def test_bad_criterion_number(self, tmp_path, capsys):
        assert run(["suite", str(tmp_path), "--only", "12"], capsys)[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "broken_sobolev", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.1.0"
