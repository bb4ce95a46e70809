import json
import os
import subprocess
import sys

import pytest

from alphacf.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExpand:
    def test_gauss(self, capsys):
        code, out, _ = run(capsys, "expand", "--alpha", "1", "--x", "0.4", "--n", "2")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "digits: 2+,2+"
        assert lines[2] == "residual: 0.0"

    def test_negative_digit(self, capsys):
        code, out, _ = run(capsys, "expand", "--alpha", "0.5", "--x", "-0.4", "--n", "1")
        assert code == 0
        assert "digits: 3-" in out
        assert "residual: -0.5" in out

    def test_zero(self, capsys):
        code, out, _ = run(capsys, "expand", "--alpha", "1", "--x", "0", "--n", "5")
        assert code == 0
        assert out.splitlines()[0] == "digits: "
        assert "residual: 0.0" in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "expand", "--alpha", "1", "--x", "0.4", "--n", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert set(obj) == {"command", "params", "result"}
        assert obj["result"]["digits"] == ["2+", "2+"]
        assert obj["result"]["convergents"] == [[0, 1], [1, 2], [2, 5]]

    @pytest.mark.parametrize("argv", [
        ["--alpha", "0.5", "--x", "0.9", "--n", "2"],
        ["--alpha", "0.01", "--x", "0.0", "--n", "2"],
        ["--alpha", "0.5", "--x", "0.1", "--n", "-1"],
        ["--alpha", "0.5", "--x", "0.1"],
    ])
    def test_bad_input(self, capsys, argv):
        code, _, _ = run(capsys, "expand", *argv)
        assert code == 2


class TestCommands:
    def test_entropy(self, capsys):
        code, out, _ = run(capsys, "entropy", "--alpha", "1", "--cells", "4096")
        assert code == 0
        assert "2.3731" in out

    def test_bad_cells(self, capsys):
        assert run(capsys, "entropy", "--alpha", "1", "--cells", "1000")[0] == 2

    def test_bad_seed(self, capsys):
        assert run(capsys, "entropy", "--alpha", "1", "--method", "birkhoff", "--seed", "-1")[0] == 2

    def test_no_convergence_leaves_no_file(self, capsys, tmp_path):
        out = tmp_path / "d.csv"
        code, _, err = run(capsys, "density", "--alpha", "0.7", "--cells", "256", "--max-iter", "1",
                           "--out", str(out))
        assert code == 3
        assert "residual" in err
        assert not out.exists()
        assert os.listdir(tmp_path) == []

    def test_density_csv(self, capsys, tmp_path):
        out = tmp_path / "d.csv"
        code, _, _ = run(capsys, "density", "--alpha", "0.7", "--cells", "256", "--out", str(out))
        assert code == 0
        raw = out.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "cell_left,cell_right,value"
        assert len(lines) == 257

    def test_sweep_rows(self, capsys, tmp_path):
        out = tmp_path / "h.csv"
        fit = tmp_path / "fit.json"
        code, _, _ = run(capsys, "sweep", "--from", "0.62", "--to", "1.0", "--step", "0.004", "--cells", "256",
                         "--out", str(out), "--fit-out", str(fit))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "alpha,h_rohlin,err,n_cells,j_max"
        assert len(lines) - 1 == 96
        assert [f["s"] for f in json.loads(fit.read_text())] == [0.3, 0.45, 0.49]

    def test_sweep_below_floor(self, capsys):
        assert run(capsys, "sweep", "--from", "0.01", "--to", "0.1", "--step", "0.01")[0] == 2

    def test_clt_and_reruns_are_byte_identical(self, capsys, tmp_path):
        argv = ["clt", "--alpha", "0.7", "--cells", "512", "--n", "200", "--m", "300", "--seed", "5"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, *argv, "--out", str(a))[0] == 0
        assert run(capsys, *argv, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == "sample_index,normalized_sum"

    def test_variance_json(self, capsys, tmp_path):
        out = tmp_path / "v.json"
        code, stdout, _ = run(capsys, "variance", "--alpha", "0.7", "--cells", "512", "--method", "green_kubo",
                              "--format", "json", "--out", str(out))
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["command"] == "variance"
        assert obj["result"][0]["method"] == "green_kubo"
        assert "green_kubo=" in stdout

    def test_keller(self, capsys, tmp_path):
        out = tmp_path / "k.json"
        code, _, _ = run(capsys, "keller", "--alpha", "0.7", "--beta", "0.71", "--format", "json",
                         "--out", str(out))
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["sup_displacement"] <= 0.02

    def test_keller_outside_guard(self, capsys):
        assert run(capsys, "keller", "--alpha", "0.7", "--beta", "0.8")[0] == 2

    def test_invariants(self, capsys):
        code, out, _ = run(capsys, "invariants", "--alpha", "0.7", "--n", "4")
        assert code == 0
        assert "FAIL" not in out


class TestConfig:
    def test_config_supplies_flags(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"alpha": 1, "x": 0.4, "n": 2}))
        code, out, _ = run(capsys, "expand", "--config", str(cfg))
        assert code == 0
        assert "digits: 2+,2+" in out

    def test_flags_win(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"alpha": 1, "x": 0.4, "n": 2}))
        code, out, _ = run(capsys, "expand", "--config", str(cfg), "--n", "1")
        assert code == 0
        assert "digits: 2+\n" in out

    def test_command_from_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"command": "expand", "alpha": 1, "x": 0.4, "n": 1}))
        code, out, _ = run(capsys, "--config", str(cfg))
        assert code == 0
        assert "digits: 2+" in out

    def test_missing_config(self, capsys, tmp_path):
        assert run(capsys, "expand", "--config", str(tmp_path / "none.json"))[0] == 2

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("[1, 2")
        assert run(capsys, "expand", "--config", str(cfg))[0] == 2


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "alphacf.cli", "expand", "--alpha", "1", "--x", "0.4", "--n", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("digits: 2+,2+")
