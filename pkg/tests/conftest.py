"""Shared fixtures: the third-order demo problem and its pinned oracles.

The pinned constants below were computed independently (characteristic
polynomial root finding for the open-loop radius, closed-form channel
moments confirmed by direct sampling at 1e7 draws, dense eigensolves of the
explicitly assembled second-moment operator) before being frozen here.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from resilient_lmi import AttackChannel, AttackedSystem, Gains, PlantModel

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
DEMO_CONFIG = os.path.join(CONFIG_DIR, "demo_third_order.json")
DEMO_GAINS = os.path.join(CONFIG_DIR, "demo_third_order_gains.json")

DEMO_A = [[-1.7, -0.5, 0.1], [1.0, 0.0, -0.7], [0.0, 0.8, 0.0]]
DEMO_B = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
DEMO_C = [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]

# (bernoulli_mean, injection_mean) per channel; injections are constant.
DEMO_SENSOR_STATS = ((0.7, 1.3), (0.8, 1.1))
DEMO_ACTUATOR_STATS = ((0.8, 1.3), (0.9, 1.1))

DEMO_X0 = np.array([1.0, 1.2, -0.8])

REF_K = np.array([[1.1475, -0.1962, -1.446], [-0.7689, 0.312, 1.3376]])
REF_L = np.array([[0.0674, 1.585], [-0.0376, -0.8844], [0.0217, 0.5095]])

# Spectral radius of the open-loop A (root of z^3 + 1.7 z^2 + 1.06 z + 0.872).
RHO_A = 1.3888488609473966

# Spectral radius of the second-moment operator under REF_K/REF_L.
REF_RHO = 0.6628295822285223

# Same operator with K = 0, L = 0 (open loop, attacked): unstable.
ZERO_GAIN_RHO = 1.9289011585548776

# (mean, variance) of the effective gain of each demo channel.
DEMO_SENSOR_MOMENTS = ((1.09, 0.0189), (1.02, 0.0016))
DEMO_ACTUATOR_MOMENTS = ((1.06, 0.0144), (1.01, 0.0009))


def make_demo_system() -> AttackedSystem:
    return AttackedSystem(
        plant=PlantModel(A=DEMO_A, B=DEMO_B, C=DEMO_C),
        sensor_channels=tuple(AttackChannel(a, b) for a, b in DEMO_SENSOR_STATS),
        actuator_channels=tuple(AttackChannel(a, b) for a, b in DEMO_ACTUATOR_STATS),
    )


@pytest.fixture
def demo_plant() -> PlantModel:
    return PlantModel(A=DEMO_A, B=DEMO_B, C=DEMO_C)


@pytest.fixture
def demo_system() -> AttackedSystem:
    return make_demo_system()


@pytest.fixture
def no_attack_system(demo_plant) -> AttackedSystem:
    clean = AttackChannel(bernoulli_mean=1.0, injection_mean=0.0)
    return AttackedSystem(
        plant=demo_plant,
        sensor_channels=(clean,) * demo_plant.p,
        actuator_channels=(clean,) * demo_plant.m,
    )


@pytest.fixture
def reference_gains() -> Gains:
    return Gains(K=REF_K, L=REF_L)
