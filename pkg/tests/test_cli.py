import csv
import io
import subprocess
import sys

import pytest

from nearopt import cli
from nearopt.stationary import InvariantViolation


def _table(text):
    body = "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def test_solve_from_file(tmp_path, capsys):
    path = tmp_path / "inst.txt"
    path.write_text("3\n0.3 0.4\n")
    assert cli.main(["solve", "--input", str(path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "2.3"
    assert out[1] == "111"


def test_unknown_command_fails():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code != 0


def test_bad_flag_value_fails(capsys):
    assert cli.main(["sweep-theta", "--dist", "gamma:2"]) == cli.EXIT_USAGE
    assert "gamma:2" in capsys.readouterr().err


def test_sweep_output_is_byte_identical(tmp_path):
    outs = []
    out = tmp_path / "run.csv"
    for jobs in ("1", "1", "2"):
        assert cli.main(["sweep-theta", "--n", "400", "--reps", "3", "--theta", "0.05,0.1",
                         "--seed", "4", "--jobs", jobs, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    # with more workers the echoed config differs only in the jobs field
    assert outs[0].replace(b"jobs=1", b"jobs=X") == outs[2].replace(b"jobs=2", b"jobs=X")
    assert b"\r\n" in outs[0]
    text = outs[0].decode()
    assert text.startswith("# nearopt ")
    rows = _table(text)
    assert [float(r["theta"]) for r in rows] == [0.05, 0.1]


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn=300\nreps=2\ntheta=0.05\nseed=9\n")
    out = tmp_path / "o.csv"
    assert cli.main(["sweep-theta", "--config", str(cfg), "--reps", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert "n=300" in text and "reps=3" in text and "seed=9" in text
    assert _table(text)[0]["reps"] == "3"


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    with pytest.raises(SystemExit):
        cli.main(["solve", "--config", str(cfg)])


def test_invariant_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise InvariantViolation("synthetic")

    monkeypatch.setitem(cli.HANDLERS, "coupling", boom)
    out = tmp_path / "c.csv"
    assert cli.main(["coupling", "--out", str(out)]) == cli.EXIT_INVARIANT
    diag = (tmp_path / "c.csv.diag.txt").read_text()
    assert "synthetic" in diag and "command=coupling" in diag


@pytest.mark.parametrize("argv", [
    ["eps-delta", "--n", "300", "--reps", "2", "--delta", "0.01,0.05,0.1"],
    ["stationary", "--n", "2000", "--reps", "2", "--length", "20000"],
    ["regen", "--cycles", "2000", "--theta", "0.08,0.05"],
    ["coupling", "--samples", "500", "--theta", "0.05"],
    ["nk", "--N", "200", "--reps", "5", "--theta", "0.01,0.02"],
    ["pattern-swap", "--n", "20000", "--alpha", "0.01,0.02"],
    ["iid", "--n", "10000", "--delta", "0.05"],
])
def test_commands_run(tmp_path, argv):
    out = tmp_path / "out.csv"
    assert cli.main(argv + ["--out", str(out)]) == 0
    rows = _table(out.read_text())
    assert rows


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nearopt", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("nearopt ")
