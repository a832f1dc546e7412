import json
import math
import subprocess
import sys

import pytest

from bifurclab import families
from bifurclab.cli import run

SMALL = {
    "lyap": ["--lambda", "2.5", "--n", "100", "--trials", "8"],
    "scan": ["--grid=-1,1,-1,1,8,8", "--n", "20", "--trials", "8", "--png"],
    "stability": ["--grid=-1,1,-1,1,8,8", "--lengths", "2,4", "--words", "4"],
    "tracezeros": ["--grid=-1,1,-1,1,9,9", "--n", "3", "--words", "4"],
    "graphvol": ["--grid=-1,1,-1,1,8,8", "--lengths", "2,4", "--trials", "3", "--ref-n", "20",
                 "--ref-trials", "4"],
    "limitset": ["--lambda", "0.5", "--count", "256", "--burnin", "50", "--res", "32"],
    "dualcheck": ["--lambda", "0.5", "--n", "100", "--trials", "8"],
}


def _json(path):
    return json.loads(path.read_text())


@pytest.mark.parametrize("command", sorted(SMALL))
def test_subcommands_write_outputs_and_replay(tmp_path, command, capsys):
    family = "schottky" if command in ("lyap",) else "riley"
    prefix = tmp_path / command
    assert run([command, "--family", family, "--seed", "3", "--out", str(prefix), *SMALL[command]]) == 0
    summary = _json(tmp_path / f"{command}_summary.json")
    assert json.loads(capsys.readouterr().out) == summary
    man = _json(tmp_path / f"{command}.manifest.json")
    assert man["command"] == command and man["seed"] == 3
    assert man["config"]["schema_version"] == 1
    assert "--out" not in man["argv"] and command not in man["argv"]
    for suffix in man["outputs"]:
        assert (tmp_path / f"{command}{suffix}").is_file()
    assert run(["replay", str(tmp_path / f"{command}.manifest.json")]) == 0
    replay = _json(tmp_path / f"{command}.replay.manifest.json")
    assert replay["outputs"] == man["outputs"]


def test_scan_outputs(tmp_path):
    p = tmp_path / "s"
    assert run(["scan", "--family", "riley", "--out", str(p), *SMALL["scan"]]) == 0
    names = {f.name for f in tmp_path.iterdir()}
    for base in ("chi_top", "chi_bottom", "support"):
        assert f"s_{base}.csv" in names and f"s_{base}.ppm" in names
    for base in ("t1", "td", "tbif"):
        assert f"s_{base}_log.ppm" in names and f"s_{base}_linear.png" in names
    rows = (tmp_path / "s_tbif.csv").read_text().splitlines()
    assert rows[0] == "re,im,value,mask" and len(rows) == 65


def test_replay_detects_tampering(tmp_path):
    p = tmp_path / "c"
    assert run(["calibrate", "--out", str(p)]) == 0
    man = _json(tmp_path / "c.manifest.json")
    man["outputs"]["_summary.json"] = "0" * 64
    (tmp_path / "c.manifest.json").write_text(json.dumps(man))
    assert run(["replay", str(tmp_path / "c.manifest.json")]) == 3


def test_thread_count_does_not_change_outputs(tmp_path):
    digests = []
    for t in ("1", "3"):
        p = tmp_path / f"t{t}"
        assert run(["stability", "--family", "riley", "--threads", t, "--out", str(p),
                    *SMALL["stability"]]) == 0
        digests.append(_json(tmp_path / f"t{t}.manifest.json")["outputs"])
    assert digests[0] == digests[1]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "fam.json"
    cfg.write_text(json.dumps(families.config("identity")))
    assert run(["lyap", "--config", str(cfg), "--lambda", "2", "--n", "50", "--trials", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    # Frobenius norm of the identity: χ = log(√2)/n exactly
    assert out["chi_top"]["value"] == pytest.approx(0.5 * math.log(2) / 50, rel=1e-12)
    assert len(out["spectrum"]) == 2


def test_exit_codes(tmp_path, capsys):
    assert run(["lyap", "--config", "nope.json", "--lambda", "1"]) == 2
    assert "config file not found: nope.json" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    cfg = families.config("riley")
    del cfg["schema_version"]
    bad.write_text(json.dumps(cfg))
    assert run(["lyap", "--config", str(bad), "--lambda", "1"]) == 2
    bad.write_text("{not json")
    assert run(["lyap", "--config", str(bad), "--lambda", "1"]) == 2
    assert run(["lyap", "--family", "riley"]) == 2  # missing --lambda
    assert run(["scan", "--family", "riley", "--grid=0,1,0,1,4,4"]) == 2
    assert run(["tracezeros", "--family", "symmetric_z", "--word", "a", "--cell", "2,2.2,-.2,.2",
                "--t", "2.5"]) == 3
    assert run(["tracezeros", "--family", "symmetric_z", "--word", "a", "--cell", "1.5,2.5,-.5,.5",
                "--t", "2.5"]) == 0
    assert json.loads(capsys.readouterr().out)["zeros"] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "bifurclab", "calibrate"], capture_output=True,
                         text=True, timeout=60)
    assert res.returncode == 0
    assert json.loads(res.stdout)["passed"] is True
