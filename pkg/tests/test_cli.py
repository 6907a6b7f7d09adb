import csv

import numpy as np
import pytest

from dampedwave.cli import main


def test_converge_writes_table(tmp_path, capsys):
    out = tmp_path / "ex1.csv"
    code = main(["converge", "--experiment", "ex1", "--N", "4,8",
                 "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "ex1" in printed
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "l2", "rate_l2", "linf", "rate_linf", "h1", "rate_h1"]
    assert rows[1][0] == "4"
    assert rows[2][0] == "8"


def test_converge_output_is_deterministic(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["converge", "--N", "4,8", "--out", str(out1)]) == 0
    assert main(["converge", "--N", "4,8", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_unknown_experiment_exits_one(capsys):
    assert main(["converge", "--experiment", "ex99"]) == 1
    assert "unknown experiment" in capsys.readouterr().err


def test_bad_n_list_rejected():
    with pytest.raises(SystemExit):
        main(["converge", "--N", "abc"])


def test_eig_fd_prints_closed_form(capsys):
    assert main(["eig", "--backend", "fd", "--N", "16"]) == 0
    out = capsys.readouterr().out
    assert "lambda1_h" in out
    assert f"{2 * np.pi ** 2:.6f}"[:6] in out  # analytic reference printed


def test_eig_fem_pi_square(capsys):
    assert main(["eig", "--backend", "fem", "--N", "8", "--domain", "pi"]) == 0
    out = capsys.readouterr().out
    lam = float(out.splitlines()[0].split("lambda1_h =")[1].split("(")[0])
    assert lam == pytest.approx(2.0, rel=0.05)


def test_modal_command(capsys):
    assert main(["modal", "--p", "1", "--q", "1", "--k", "1e-3",
                 "--steps", "100"]) == 0
    out = capsys.readouterr().out
    rel = float(out.splitlines()[-1].split(":")[1])
    assert rel < 1e-3


def test_decay_strict_passes_on_builtin(tmp_path, capsys):
    out = tmp_path / "decay.csv"
    code = main(["decay", "--experiment", "ex3ii", "--N", "8",
                 "--k-override", "0.01", "--strict", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "energy monotone" in printed
    assert "PASS" in printed
    assert out.exists()


def test_steady_command(capsys):
    assert main(["steady", "--N", "8"]) == 0
    out = capsys.readouterr().out
    assert "monotone decrease: yes" in out
    assert "relative reduction" in out


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("experiment = ex1\nN = 4,8\n")
    out = tmp_path / "from_cfg.csv"
    code = main(["--config", str(cfg), "converge", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["4", "8"]


def test_config_flag_wins_over_file(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("N = 4,8\n")
    out = tmp_path / "override.csv"
    code = main(["--config", str(cfg), "converge", "--N", "5", "--out", str(out)])
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["5"]


def test_config_unknown_key_exits_one(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["--config", str(cfg), "converge"]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_missing_config_file_exits_one(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg"), "converge"]) == 1
