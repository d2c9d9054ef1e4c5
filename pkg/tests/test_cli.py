"""Command-line exit codes, output files and reproducibility.

Proves:
  1. synth on the demo problem exits 0 and writes gains.json/report.json
     with certificate fields; gains round-trip through load_gains
  2. verify exits 0 for the stable reference gains and 2 for zero gains
     (report written either way)
  3. simulate exits 0 for the stable loop and 2 for the unstable one,
     writing both CSVs in each case
  4. bad configs, malformed JSON, mismatched gains, a missing x0 and an
     unwritable output path all exit 1 with a pointed stderr message
  5. certifiably hopeless attack statistics exit 3; an iteration-starved
     solver exits 4
  6. usage errors exit 1, --help exits 0
  7. rerunning synth and simulate reproduces gains.json and both CSVs
     byte for byte
"""

from __future__ import annotations

import json
import os

import numpy as np

from resilient_lmi import cli, load_gains

from conftest import DEMO_CONFIG, DEMO_GAINS


def _run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _write_json(tmp_path, name, doc):
    path = os.path.join(tmp_path, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def _demo_doc():
    with open(DEMO_CONFIG, "r", encoding="utf-8") as fh:
        return json.load(fh)


ZERO_GAINS = {"K": [[0, 0, 0], [0, 0, 0]], "L": [[0, 0], [0, 0], [0, 0]]}


def test_synth_success(tmp_path, capsys):
    out = os.path.join(tmp_path, "synth")
    code, stdout, _ = _run(capsys, ["synth", DEMO_CONFIG, "--out", out])
    assert code == 0
    assert "certified" in stdout
    gains = load_gains(os.path.join(out, "gains.json"))
    assert gains.K.shape == (2, 3)
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["command"] == "synth"
    assert report["certified"] is True
    assert report["lmi_margin"] > 0.0
    assert report["oracle_rho"] < 1.0
    assert len(report["config_digest"]) == 64
    assert report["settings"]["max_iter"] == 200
    assert report["timings_s"]["total"] > 0.0
    saved = json.load(open(os.path.join(out, "gains.json")))
    assert list(saved) == ["K", "L", "Q1", "Q2", "lmi_margin", "oracle_rho"]


def test_verify_stable_and_unstable(tmp_path, capsys):
    out = os.path.join(tmp_path, "verify")
    code, stdout, _ = _run(capsys, ["verify", DEMO_CONFIG, DEMO_GAINS, "--out", out])
    assert code == 0
    assert "stable" in stdout
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["stable"] is True and report["oracle_rho"] < 1.0

    zg = _write_json(tmp_path, "zero.json", ZERO_GAINS)
    out2 = os.path.join(tmp_path, "verify2")
    code2, _, stderr2 = _run(capsys, ["verify", DEMO_CONFIG, zg, "--out", out2])
    assert code2 == 2
    assert "not mean-square stable" in stderr2
    report2 = json.load(open(os.path.join(out2, "report.json")))
    assert report2["stable"] is False


def test_simulate_stable_and_unstable(tmp_path, capsys):
    out = os.path.join(tmp_path, "sim")
    code, stdout, _ = _run(
        capsys,
        ["simulate", DEMO_CONFIG, DEMO_GAINS, "--runs", "50", "--steps", "40",
         "--seed", "7", "--out", out],
    )
    assert code == 0
    assert "empirically stable" in stdout
    assert os.path.exists(os.path.join(out, "trajectories.csv"))
    assert os.path.exists(os.path.join(out, "mean_square.csv"))
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["empirically_stable"] is True
    assert report["runs"] == 50 and report["steps"] == 40 and report["seed"] == 7
    with open(os.path.join(out, "trajectories.csv")) as fh:
        assert sum(1 for _ in fh) == 1 + 50 * 41

    zg = _write_json(tmp_path, "zero.json", ZERO_GAINS)
    out2 = os.path.join(tmp_path, "sim2")
    code2, _, stderr2 = _run(
        capsys,
        ["simulate", DEMO_CONFIG, zg, "--runs", "10", "--steps", "120", "--out", out2],
    )
    assert code2 == 2
    assert "not empirically stable" in stderr2
    assert os.path.exists(os.path.join(out2, "trajectories.csv"))
    assert os.path.exists(os.path.join(out2, "mean_square.csv"))


def test_bad_inputs_exit_one(tmp_path, capsys):
    base = _demo_doc()

    bad = json.loads(json.dumps(base))
    bad["sensors"][0]["alpha_mean"] = 1.2
    path = _write_json(tmp_path, "bad.json", bad)
    code, _, stderr = _run(capsys, ["synth", path, "--out", str(tmp_path)])
    assert code == 1
    assert "sensors[0].alpha_mean" in stderr

    broken = os.path.join(tmp_path, "broken.json")
    with open(broken, "w") as fh:
        fh.write('{"plant": [,}')
    code, _, stderr = _run(capsys, ["synth", broken, "--out", str(tmp_path)])
    assert code == 1
    assert "invalid JSON" in stderr

    wrong = _write_json(tmp_path, "wrong.json", {"K": [[1.0, 2.0]], "L": [[1.0], [2.0]]})
    code, _, stderr = _run(capsys, ["verify", DEMO_CONFIG, wrong, "--out", str(tmp_path)])
    assert code == 1
    assert "K has shape" in stderr

    nox = json.loads(json.dumps(base))
    del nox["x0"]
    path = _write_json(tmp_path, "nox.json", nox)
    code, _, stderr = _run(capsys, ["simulate", path, DEMO_GAINS, "--runs", "2",
                                    "--steps", "3", "--out", str(tmp_path)])
    assert code == 1
    assert "lacks x0" in stderr

    blocker = os.path.join(tmp_path, "blocker")
    with open(blocker, "w") as fh:
        fh.write("occupied")
    code, _, stderr = _run(capsys, ["verify", DEMO_CONFIG, DEMO_GAINS, "--out", blocker])
    assert code == 1
    assert "error" in stderr

    code, _, stderr = _run(capsys, ["synth", os.path.join(tmp_path, "absent.json"),
                                    "--out", str(tmp_path)])
    assert code == 1
    assert "cannot read" in stderr


def test_infeasible_exits_three(tmp_path, capsys):
    doc = _demo_doc()
    for ch in doc["sensors"]:
        ch["alpha_mean"] = 0.0
        ch["beta_mean"] = 0.0
    for ch in doc["actuators"]:
        ch["gamma_mean"] = 0.0
        ch["delta_mean"] = 0.0
    path = _write_json(tmp_path, "hopeless.json", doc)
    code, _, stderr = _run(capsys, ["synth", path, "--out", str(tmp_path)])
    assert code == 3
    assert "infeasible" in stderr


def test_numerical_failure_exits_four(tmp_path, capsys):
    doc = _demo_doc()
    doc["solver"]["max_iter"] = 1
    path = _write_json(tmp_path, "starved.json", doc)
    code, _, stderr = _run(capsys, ["synth", path, "--out", str(tmp_path)])
    assert code == 4
    assert "numerical failure" in stderr


def test_usage_and_help(capsys):
    assert cli.main([]) == 1
    capsys.readouterr()
    assert cli.main(["--help"]) == 0
    capsys.readouterr()
    assert cli.main(["synth"]) == 1
    capsys.readouterr()
    assert cli.main(["frobnicate", "x"]) == 1
    capsys.readouterr()


def test_repeat_runs_byte_identical(tmp_path, capsys):
    out_a = os.path.join(tmp_path, "a")
    out_b = os.path.join(tmp_path, "b")
    for out in (out_a, out_b):
        assert cli.main(["synth", DEMO_CONFIG, "--out", out]) == 0
        capsys.readouterr()
    assert _read(os.path.join(out_a, "gains.json")) == _read(os.path.join(out_b, "gains.json"))

    for out in (out_a, out_b):
        assert cli.main(["simulate", DEMO_CONFIG, DEMO_GAINS, "--runs", "30",
                         "--steps", "25", "--seed", "3", "--out", out]) == 0
        capsys.readouterr()
    for name in ("trajectories.csv", "mean_square.csv"):
        assert _read(os.path.join(out_a, name)) == _read(os.path.join(out_b, name))
