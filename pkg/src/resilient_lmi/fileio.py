"""Config, gains and result files.

JSON output goes through a fixed serializer (17 significant digits, keys in
insertion order, 2-space indent) so identical inputs produce byte-identical
files.  CSV output uses comma separators, "\\n" line endings and no quoting;
floats are written with repr, which round-trips exactly.

Config errors name the offending field by its JSON path, e.g.
``sensors[0].alpha_mean``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import (
    DISTRIBUTIONS,
    AttackChannel,
    AttackedSystem,
    Gains,
    PlantModel,
    ValidationError,
    check_gains,
)
from .settings import DEFAULT, NumericSettings

__all__ = [
    "ConfigError",
    "ConfigDocument",
    "load_config",
    "load_gains",
    "config_digest",
    "to_json",
    "write_json",
    "write_gains_file",
    "write_report",
    "write_trajectories_csv",
    "write_mean_square_csv",
]

_TOP_KEYS = {"plant", "sensors", "actuators", "x0", "xhat0", "solver"}
_PLANT_KEYS = {"A", "B", "C"}
_SENSOR_KEYS = {"alpha_mean", "beta_mean", "beta_var", "beta_dist"}
_ACTUATOR_KEYS = {"gamma_mean", "delta_mean", "delta_var", "delta_dist"}
_SOLVER_KEYS = {"eps_strict", "max_iter"}
_GAINS_KEYS = {"K", "L", "Q1", "Q2", "lmi_margin", "oracle_rho"}


class ConfigError(ValueError):
    """A config or gains file cannot be parsed or fails validation."""


@dataclass(frozen=True, eq=False)
class ConfigDocument:
    """A parsed problem description: system, optional ICs, solver settings."""

    system: AttackedSystem
    x0: np.ndarray | None
    xhat0: np.ndarray | None
    settings: NumericSettings


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _check_keys(obj: dict, allowed: set, required: set, where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}: missing key {key!r}")


def _number(obj: dict, where: str, key: str, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{where}.{key} is missing")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be finite, got {value!r}")
    return float(value)


def _channel(obj, where: str, mean_key: str, inj_prefix: str) -> AttackChannel:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = _SENSOR_KEYS if mean_key == "alpha_mean" else _ACTUATOR_KEYS
    _check_keys(obj, allowed, {mean_key, f"{inj_prefix}_mean"}, where)
    bern = _number(obj, where, mean_key)
    if not 0.0 <= bern <= 1.0:
        raise ConfigError(f"{where}.{mean_key} must be in [0, 1], got {bern!r}")
    inj_mean = _number(obj, where, f"{inj_prefix}_mean")
    inj_var = _number(obj, where, f"{inj_prefix}_var", default=0.0)
    if inj_var < 0.0:
        raise ConfigError(f"{where}.{inj_prefix}_var must be nonnegative, got {inj_var!r}")
    dist = obj.get(f"{inj_prefix}_dist", "constant")
    if dist not in DISTRIBUTIONS:
        raise ConfigError(
            f"{where}.{inj_prefix}_dist must be one of {DISTRIBUTIONS}, got {dist!r}"
        )
    try:
        return AttackChannel(
            bernoulli_mean=bern,
            injection_mean=inj_mean,
            injection_variance=inj_var,
            injection_distribution=dist,
        )
    except ValidationError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _matrix(obj: dict, where: str, key: str) -> np.ndarray:
    if key not in obj:
        raise ConfigError(f"{where}.{key} is missing")
    try:
        return linalg.as_matrix(obj[key], f"{where}.{key}")
    except linalg.LinalgError as exc:
        raise ConfigError(str(exc)) from None


def _state_vector(doc: dict, key: str, n: int) -> np.ndarray | None:
    if key not in doc:
        return None
    try:
        vec = linalg.as_vector(doc[key], key)
    except linalg.LinalgError as exc:
        raise ConfigError(str(exc)) from None
    if vec.size != n:
        raise ConfigError(f"{key} has length {vec.size}, expected {n} to match the plant")
    return vec


def _solver_settings(doc: dict) -> NumericSettings:
    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("solver must be an object")
    _check_keys(solver, _SOLVER_KEYS, set(), "solver")
    overrides = {}
    if "eps_strict" in solver:
        eps = _number(solver, "solver", "eps_strict")
        if eps <= 0.0:
            raise ConfigError(f"solver.eps_strict must be positive, got {eps!r}")
        overrides["eps_strict"] = eps
    if "max_iter" in solver:
        raw = solver["max_iter"]
        if isinstance(raw, bool) or not isinstance(raw, int) or raw < 1:
            raise ConfigError(f"solver.max_iter must be a positive integer, got {raw!r}")
        overrides["max_iter"] = raw
    return dataclasses.replace(DEFAULT, **overrides) if overrides else DEFAULT


def load_config(path) -> ConfigDocument:
    """Parse and validate a problem config file."""
    doc = _read_json(path)
    _check_keys(doc, _TOP_KEYS, {"plant", "sensors", "actuators"}, "config")
    plant_obj = doc["plant"]
    if not isinstance(plant_obj, dict):
        raise ConfigError("plant must be an object")
    _check_keys(plant_obj, _PLANT_KEYS, _PLANT_KEYS, "plant")
    try:
        plant = PlantModel(
            A=_matrix(plant_obj, "plant", "A"),
            B=_matrix(plant_obj, "plant", "B"),
            C=_matrix(plant_obj, "plant", "C"),
        )
    except ValidationError as exc:
        raise ConfigError(f"plant: {exc}") from None
    for key in ("sensors", "actuators"):
        if not isinstance(doc[key], list):
            raise ConfigError(f"{key} must be a list")
    sensors = tuple(
        _channel(ch, f"sensors[{i}]", "alpha_mean", "beta")
        for i, ch in enumerate(doc["sensors"])
    )
    actuators = tuple(
        _channel(ch, f"actuators[{i}]", "gamma_mean", "delta")
        for i, ch in enumerate(doc["actuators"])
    )
    try:
        system = AttackedSystem(
            plant=plant, sensor_channels=sensors, actuator_channels=actuators
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    return ConfigDocument(
        system=system,
        x0=_state_vector(doc, "x0", plant.n),
        xhat0=_state_vector(doc, "xhat0", plant.n),
        settings=_solver_settings(doc),
    )


def load_gains(path, plant: PlantModel | None = None) -> Gains:
    """Parse a gains file; only K and L are read, the rest is certificate."""
    doc = _read_json(path)
    _check_keys(doc, _GAINS_KEYS, {"K", "L"}, "gains")
    try:
        gains = Gains(
            K=linalg.as_matrix(doc["K"], "K"), L=linalg.as_matrix(doc["L"], "L")
        )
    except (ValidationError, linalg.LinalgError) as exc:
        raise ConfigError(f"gains: {exc}") from None
    if plant is not None:
        try:
            check_gains(plant, gains)
        except ValidationError as exc:
            raise ConfigError(f"gains: {exc}") from None
    return gains


def config_digest(path) -> str:
    """SHA-256 of the raw file bytes, for provenance lines in reports."""
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _json_fragment(value, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            out.append(f"{pad}  {json.dumps(str(key))}: ")
            _json_fragment(item, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        items = list(np.asarray(value).tolist()) if isinstance(value, np.ndarray) else list(value)
        if not items:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(items):
            out.append(pad + "  ")
            _json_fragment(item, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        out.append(format(v, ".17g") if math.isfinite(v) else "null")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"cannot serialize {type(value).__name__} to JSON")


def to_json(value) -> str:
    """Deterministic JSON text: 17 significant digits, insertion order."""
    out: list = []
    _json_fragment(value, 0, out)
    out.append("\n")
    return "".join(out)


def write_json(path, value) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(value))


def write_gains_file(path, gains: Gains, Q1=None, Q2=None, lmi_margin=None, oracle_rho=None) -> None:
    """Write gains plus whatever certificate pieces accompany them."""
    doc = {"K": gains.K, "L": gains.L}
    if Q1 is not None:
        doc["Q1"] = np.asarray(Q1)
    if Q2 is not None:
        doc["Q2"] = np.asarray(Q2)
    if lmi_margin is not None:
        doc["lmi_margin"] = float(lmi_margin)
    if oracle_rho is not None:
        doc["oracle_rho"] = float(oracle_rho)
    write_json(path, doc)


def write_report(path, report: dict) -> None:
    write_json(path, report)


def _csv_float(value) -> str:
    return repr(float(value))


def write_trajectories_csv(path, records) -> None:
    """Per-step rows of every run: states, signals and attack indicators."""
    records = tuple(records)
    if not records:
        raise ValueError("no trajectory records to write")
    n = records[0].x.shape[1]
    m = records[0].u.shape[1]
    p = records[0].ytilde.shape[1]
    header = (
        ["run", "k"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"xhat{i + 1}" for i in range(n)]
        + [f"u{i + 1}" for i in range(m)]
        + [f"ytilde{i + 1}" for i in range(p)]
        + [f"alpha{i + 1}" for i in range(p)]
        + [f"gamma{i + 1}" for i in range(m)]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for rec in records:
            steps = rec.x.shape[0]
            for k in range(steps):
                cells = [str(rec.run_index), str(k)]
                for block in (rec.x[k], rec.xhat[k], rec.u[k], rec.ytilde[k]):
                    cells.extend(_csv_float(v) for v in block)
                cells.extend(str(int(v)) for v in rec.alpha[k])
                cells.extend(str(int(v)) for v in rec.gamma[k])
                fh.write(",".join(cells) + "\n")


def write_mean_square_csv(path, mean_square) -> None:
    """Empirical mean-square trace, one row per step."""
    ms = np.asarray(mean_square, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,mean_square\n")
        for k, value in enumerate(ms):
            fh.write(f"{k},{_csv_float(value)}\n")
