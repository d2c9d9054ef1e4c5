"""Config parsing, gains files, deterministic JSON and CSV output.

Proves:
  1. the shipped demo config parses into the expected system
  2. unknown/missing keys and bad values are reported by JSON path
  3. channel defaults (zero variance, constant family) apply
  4. solver overrides land in the settings record
  5. gains files require K and L, tolerate certificate keys, reject others
  6. JSON output is deterministic, 17-significant-digit, and round-trips
     gains exactly
  7. trajectory and mean-square CSVs have the documented header, row
     count, separators and float formatting
  8. config_digest is the SHA-256 of the file bytes
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import pytest

from resilient_lmi import ConfigError, Gains, load_config, load_gains
from resilient_lmi.fileio import (
    config_digest,
    to_json,
    write_gains_file,
    write_mean_square_csv,
    write_trajectories_csv,
)
from resilient_lmi.simulator import SimConfig, monte_carlo

from conftest import DEMO_CONFIG, DEMO_GAINS, DEMO_X0, make_demo_system


def _write(tmp_path, name, doc):
    path = os.path.join(tmp_path, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def _demo_doc():
    with open(DEMO_CONFIG, "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_demo_config_parses(tmp_path):
    doc = load_config(DEMO_CONFIG)
    sys = doc.system
    assert (sys.plant.n, sys.plant.m, sys.plant.p) == (3, 2, 2)
    assert sys.sensor_channels[0].bernoulli_mean == 0.7
    assert sys.actuator_channels[1].injection_mean == 1.1
    assert np.array_equal(doc.x0, DEMO_X0)
    assert np.array_equal(doc.xhat0, np.zeros(3))
    assert doc.settings.eps_strict == 1e-8
    assert doc.settings.max_iter == 200


def test_field_path_error_messages(tmp_path):
    base = _demo_doc()

    bad = json.loads(json.dumps(base))
    bad["sensors"][0]["alpha_mean"] = 1.2
    with pytest.raises(ConfigError, match=r"sensors\[0\]\.alpha_mean"):
        load_config(_write(tmp_path, "a.json", bad))

    bad = json.loads(json.dumps(base))
    bad["actuators"][1]["delta_var"] = -0.5
    with pytest.raises(ConfigError, match=r"actuators\[1\]\.delta_var"):
        load_config(_write(tmp_path, "b.json", bad))

    bad = json.loads(json.dumps(base))
    bad["sensors"][1]["beta_dist"] = "poisson"
    with pytest.raises(ConfigError, match=r"sensors\[1\]\.beta_dist"):
        load_config(_write(tmp_path, "c.json", bad))

    bad = json.loads(json.dumps(base))
    bad["plant"]["D"] = [[0.0]]
    with pytest.raises(ConfigError, match="plant: unknown key 'D'"):
        load_config(_write(tmp_path, "d.json", bad))

    bad = json.loads(json.dumps(base))
    del bad["actuators"][0]["delta_mean"]
    with pytest.raises(ConfigError, match=r"actuators\[0\].*delta_mean"):
        load_config(_write(tmp_path, "e.json", bad))

    bad = json.loads(json.dumps(base))
    bad["x0"] = [1.0, 2.0]
    with pytest.raises(ConfigError, match="x0 has length 2"):
        load_config(_write(tmp_path, "f.json", bad))

    path = os.path.join(tmp_path, "broken.json")
    with open(path, "w") as fh:
        fh.write('{"plant": }')
    with pytest.raises(ConfigError, match="line 1"):
        load_config(path)


def test_channel_defaults_and_solver_overrides(tmp_path):
    doc = _demo_doc()
    for ch in doc["sensors"] + doc["actuators"]:
        for key in list(ch):
            if key.endswith("_var") or key.endswith("_dist"):
                del ch[key]
    doc["solver"] = {"eps_strict": 1e-6, "max_iter": 50}
    parsed = load_config(_write(tmp_path, "cfg.json", doc))
    assert parsed.system.sensor_channels[0].injection_variance == 0.0
    assert parsed.system.sensor_channels[0].injection_distribution == "constant"
    assert parsed.settings.eps_strict == 1e-6
    assert parsed.settings.max_iter == 50
    del doc["solver"], doc["x0"], doc["xhat0"]
    bare = load_config(_write(tmp_path, "bare.json", doc))
    assert bare.x0 is None and bare.xhat0 is None
    assert bare.settings.max_iter == 200


def test_gains_file_contract(tmp_path):
    sys = make_demo_system()
    gains = load_gains(DEMO_GAINS, sys.plant)
    assert gains.K.shape == (2, 3)

    extras = {
        "K": gains.K.tolist(),
        "L": gains.L.tolist(),
        "Q1": np.eye(3).tolist(),
        "lmi_margin": 1.0,
        "oracle_rho": 0.5,
    }
    load_gains(_write(tmp_path, "extras.json", extras))

    with pytest.raises(ConfigError, match="missing key 'L'"):
        load_gains(_write(tmp_path, "nol.json", {"K": gains.K.tolist()}))
    with pytest.raises(ConfigError, match="unknown key"):
        load_gains(_write(tmp_path, "junk.json", {"K": [[1.0]], "L": [[1.0]], "M": 3}))
    with pytest.raises(ConfigError, match="K has shape"):
        load_gains(_write(tmp_path, "shape.json", {"K": [[1.0]], "L": [[1.0]]}), sys.plant)


def test_json_determinism_and_roundtrip(tmp_path):
    value = {"a": 1.0 / 3.0, "b": [1, 2.5e-300, float("nan")], "c": {"d": True, "e": None}}
    text = to_json(value)
    assert text == to_json(value)
    assert "0.33333333333333331" in text
    assert "null" in text
    parsed = json.loads(text)
    assert parsed["a"] == 1.0 / 3.0
    assert parsed["b"][1] == 2.5e-300

    gains = Gains(K=np.random.default_rng(50).normal(size=(2, 3)), L=np.zeros((3, 2)))
    path = os.path.join(tmp_path, "gains.json")
    write_gains_file(path, gains, Q1=np.eye(3), Q2=np.eye(3), lmi_margin=0.25, oracle_rho=0.5)
    loaded = load_gains(path)
    assert np.array_equal(loaded.K, gains.K)
    doc = json.load(open(path))
    assert list(doc) == ["K", "L", "Q1", "Q2", "lmi_margin", "oracle_rho"]


def test_csv_layout(tmp_path):
    sys = make_demo_system()
    gains = load_gains(DEMO_GAINS, sys.plant)
    cfg = SimConfig(steps=4, runs=3, seed=1, x0=DEMO_X0, xhat0=np.zeros(3))
    est = monte_carlo(sys, gains, cfg, keep_trajectories=True)

    traj_path = os.path.join(tmp_path, "trajectories.csv")
    write_trajectories_csv(traj_path, est.trajectories)
    with open(traj_path, "rb") as fh:
        raw = fh.read()
    assert b"\r" not in raw and b'"' not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == (
        "run,k,x1,x2,x3,xhat1,xhat2,xhat3,u1,u2,ytilde1,ytilde2,"
        "alpha1,alpha2,gamma1,gamma2"
    )
    assert len(lines) == 1 + 3 * 5
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "0"
    assert [float(v) for v in first[2:5]] == list(DEMO_X0)
    assert set(first[12:16]) <= {"0", "1"}
    # repr round-trips every float cell exactly.
    rec = est.trajectories[2]
    row = lines[1 + 2 * 5 + 3].split(",")
    assert float(row[2]) == rec.x[3, 0]
    assert float(row[10]) == rec.ytilde[3, 0]

    ms_path = os.path.join(tmp_path, "ms.csv")
    write_mean_square_csv(ms_path, est.mean_square)
    ms_lines = open(ms_path).read().splitlines()
    assert ms_lines[0] == "k,mean_square"
    assert len(ms_lines) == 6
    assert float(ms_lines[4].split(",")[1]) == est.mean_square[3]


def test_config_digest_matches_hashlib():
    with open(DEMO_CONFIG, "rb") as fh:
        expected = hashlib.sha256(fh.read()).hexdigest()
    assert config_digest(DEMO_CONFIG) == expected
    with pytest.raises(ConfigError, match="cannot read"):
        config_digest("/nonexistent/path.json")
