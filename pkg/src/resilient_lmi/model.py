"""Plant, attack-channel statistics and gain containers.

Every object validates itself at construction, so no invalid instance can
circulate.  ``validate`` re-checks a composed system against (possibly
non-default) settings and reports the offending channel index or matrix by
name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .settings import DEFAULT, NumericSettings

__all__ = [
    "DISTRIBUTIONS",
    "ValidationError",
    "PlantModel",
    "AttackChannel",
    "AttackedSystem",
    "Gains",
    "validate",
    "check_gains",
]

DISTRIBUTIONS = ("constant", "uniform", "gaussian")


class ValidationError(ValueError):
    """A model object violates one of its invariants."""


def _finite_scalar(value, name: str) -> float:
    if isinstance(value, (str, bytes)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ValidationError(f"{name} must be finite, got {out!r}")
    return out


def _check_plant(A: np.ndarray, B: np.ndarray, C: np.ndarray, settings: NumericSettings) -> None:
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValidationError(f"A must be square, got shape {A.shape}")
    if B.shape[0] != n:
        raise ValidationError(f"B has {B.shape[0]} rows, expected {n} to match A")
    if C.shape[1] != n:
        raise ValidationError(f"C has {C.shape[1]} columns, expected {n} to match A")
    if B.shape[1] < 1 or C.shape[0] < 1 or n < 1:
        raise ValidationError("plant dimensions must all be at least 1")
    if B.shape[1] > n:
        raise ValidationError(
            f"B has more inputs ({B.shape[1]}) than states ({n}); "
            "the SVD-aligned Lyapunov structure needs n >= m"
        )
    s = np.linalg.svd(B, compute_uv=False)
    if s[-1] <= settings.rank_tol * s[0]:
        raise ValidationError("B must have full column rank")


@dataclass(frozen=True, eq=False)
class PlantModel:
    """State-space triple of x(k+1) = A x(k) + B u(k), y(k) = C x(k)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        try:
            A = linalg.as_matrix(self.A, "A").copy()
            B = linalg.as_matrix(self.B, "B").copy()
            C = linalg.as_matrix(self.C, "C").copy()
        except linalg.LinalgError as exc:
            raise ValidationError(str(exc)) from None
        _check_plant(A, B, C, DEFAULT)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


def _check_channel(ch: "AttackChannel") -> None:
    if not 0.0 <= ch.bernoulli_mean <= 1.0:
        raise ValidationError(
            f"bernoulli_mean {ch.bernoulli_mean!r} outside [0, 1]"
        )
    if ch.injection_variance < 0.0:
        raise ValidationError(
            f"injection_variance {ch.injection_variance!r} must be nonnegative"
        )
    if ch.injection_distribution not in DISTRIBUTIONS:
        raise ValidationError(
            f"injection_distribution {ch.injection_distribution!r} "
            f"not one of {DISTRIBUTIONS}"
        )
    if ch.injection_distribution == "constant" and ch.injection_variance != 0.0:
        raise ValidationError(
            "constant injection distribution requires zero variance, "
            f"got {ch.injection_variance!r}"
        )


@dataclass(frozen=True)
class AttackChannel:
    """Statistics of one sensor or actuator link under Bernoulli switching.

    ``bernoulli_mean`` is the probability that the link operates normally at
    a given step; with the complementary probability the transmitted value
    is replaced by the true signal scaled by an independent random factor
    with the given mean, variance and two-moment distribution family.  The
    Bernoulli variance is never stored: it is determined by the mean.
    """

    bernoulli_mean: float
    injection_mean: float
    injection_variance: float = 0.0
    injection_distribution: str = "constant"

    def __post_init__(self):
        object.__setattr__(
            self, "bernoulli_mean", _finite_scalar(self.bernoulli_mean, "bernoulli_mean")
        )
        object.__setattr__(
            self, "injection_mean", _finite_scalar(self.injection_mean, "injection_mean")
        )
        object.__setattr__(
            self,
            "injection_variance",
            _finite_scalar(self.injection_variance, "injection_variance"),
        )
        _check_channel(self)


@dataclass(frozen=True, eq=False)
class AttackedSystem:
    """A plant together with per-channel attack statistics."""

    plant: PlantModel
    sensor_channels: tuple[AttackChannel, ...]
    actuator_channels: tuple[AttackChannel, ...]

    def __post_init__(self):
        if not isinstance(self.plant, PlantModel):
            raise ValidationError("plant must be a PlantModel")
        sensors = tuple(self.sensor_channels)
        actuators = tuple(self.actuator_channels)
        for kind, chans in (("sensor", sensors), ("actuator", actuators)):
            for i, ch in enumerate(chans):
                if not isinstance(ch, AttackChannel):
                    raise ValidationError(f"{kind} channel {i} is not an AttackChannel")
        if len(sensors) != self.plant.p:
            raise ValidationError(
                f"expected {self.plant.p} sensor channels, got {len(sensors)}"
            )
        if len(actuators) != self.plant.m:
            raise ValidationError(
                f"expected {self.plant.m} actuator channels, got {len(actuators)}"
            )
        object.__setattr__(self, "sensor_channels", sensors)
        object.__setattr__(self, "actuator_channels", actuators)


@dataclass(frozen=True, eq=False)
class Gains:
    """Controller gain K (m x n) and observer gain L (n x p)."""

    K: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        try:
            K = linalg.as_matrix(self.K, "K").copy()
            L = linalg.as_matrix(self.L, "L").copy()
        except linalg.LinalgError as exc:
            raise ValidationError(str(exc)) from None
        if K.shape[1] != L.shape[0]:
            raise ValidationError(
                f"K columns ({K.shape[1]}) and L rows ({L.shape[0]}) "
                "disagree on the state dimension"
            )
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)


def validate(sys: AttackedSystem, settings: NumericSettings = DEFAULT) -> AttackedSystem:
    """Re-check every invariant of a composed system; returns it unchanged.

    Idempotent.  Errors name the offending matrix or channel index.
    """
    if not isinstance(sys, AttackedSystem):
        raise ValidationError("expected an AttackedSystem")
    plant = sys.plant
    _check_plant(plant.A, plant.B, plant.C, settings)
    for kind, chans in (
        ("sensor", sys.sensor_channels),
        ("actuator", sys.actuator_channels),
    ):
        for i, ch in enumerate(chans):
            try:
                _check_channel(ch)
            except ValidationError as exc:
                raise ValidationError(f"{kind} channel {i}: {exc}") from None
    if len(sys.sensor_channels) != plant.p:
        raise ValidationError(
            f"expected {plant.p} sensor channels, got {len(sys.sensor_channels)}"
        )
    if len(sys.actuator_channels) != plant.m:
        raise ValidationError(
            f"expected {plant.m} actuator channels, got {len(sys.actuator_channels)}"
        )
    return sys


def check_gains(plant: PlantModel, gains: Gains) -> None:
    """Raise unless the gain shapes match the plant dimensions."""
    if gains.K.shape != (plant.m, plant.n):
        raise ValidationError(
            f"K has shape {gains.K.shape}, expected ({plant.m}, {plant.n})"
        )
    if gains.L.shape != (plant.n, plant.p):
        raise ValidationError(
            f"L has shape {gains.L.shape}, expected ({plant.n}, {plant.p})"
        )
