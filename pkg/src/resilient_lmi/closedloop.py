"""Mean closed loop and exact second-moment propagation for the attacked loop.

The augmented state is zeta = (x, e) with estimation error e = x - xhat.
Conditioned on the channel draws the loop is linear in zeta; splitting each
diagonal channel gain into its mean plus a zero-mean fluctuation yields a
deterministic mean matrix plus one rank-structured fluctuation matrix per
channel.  Since the fluctuations are independent across channels and steps,
the one-step map of E[zeta zeta'] is the explicit linear operator

    T = Gbar kron Gbar + sum_j var_j (Aj kron Aj) + sum_i var_i (Si kron Si)

(column-major vec convention), and exponential mean-square stability is
equivalent to the spectral radius of T being below one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import AttackedSystem, Gains, check_gains
from .moments import channel_moments
from .settings import DEFAULT, NumericSettings

__all__ = [
    "ClosedLoop",
    "SecondMomentOperator",
    "build_closed_loop",
    "second_moment_operator",
    "apply_operator",
    "propagate_moments",
    "is_ms_stable",
]


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Mean dynamics and per-channel fluctuation structure of the loop."""

    gamma1_mean: np.ndarray
    actuator_channel_matrices: tuple[np.ndarray, ...]
    sensor_channel_matrices: tuple[np.ndarray, ...]
    actuator_variances: tuple[float, ...]
    sensor_variances: tuple[float, ...]

    @property
    def state_dim(self) -> int:
        return self.gamma1_mean.shape[0]


@dataclass(frozen=True, eq=False)
class SecondMomentOperator:
    """Linear map T with vec(M_next) = T vec(M) for M = E[zeta zeta']."""

    matrix: np.ndarray
    state_dim: int


def build_closed_loop(
    sys: AttackedSystem, gains: Gains, settings: NumericSettings = DEFAULT
) -> ClosedLoop:
    """Assemble the mean matrix and per-channel fluctuation matrices.

    gamma1_mean = [[A + B D2 K, -B D2 K], [0, A - L D1 C]] with D1, D2 the
    diagonal channel-gain means.  The actuator fluctuation matrix of channel
    j is [[B ej ej' K, -B ej ej' K], [0, 0]] and the sensor one of channel i
    is [[0, 0], [-L ei ei' C, 0]], each weighted by its channel variance in
    the second-moment operator.
    """
    check_gains(sys.plant, gains)
    A, B, C = sys.plant.A, sys.plant.B, sys.plant.C
    K, L = gains.K, gains.L
    n = sys.plant.n
    d1 = [channel_moments(ch, settings) for ch in sys.sensor_channels]
    d2 = [channel_moments(ch, settings) for ch in sys.actuator_channels]
    d1_mean = np.diag([m.mean for m in d1])
    d2_mean = np.diag([m.mean for m in d2])
    bk_mean = B @ d2_mean @ K
    zero = np.zeros((n, n))
    gamma1 = linalg.block_matrix(
        [[A + bk_mean, -bk_mean], [zero, A - L @ d1_mean @ C]]
    )
    actuator_mats = []
    for j in range(sys.plant.m):
        block = np.outer(B[:, j], K[j, :])
        mat = np.zeros((2 * n, 2 * n))
        mat[:n, :n] = block
        mat[:n, n:] = -block
        actuator_mats.append(mat)
    sensor_mats = []
    for i in range(sys.plant.p):
        mat = np.zeros((2 * n, 2 * n))
        mat[n:, :n] = -np.outer(L[:, i], C[i, :])
        sensor_mats.append(mat)
    return ClosedLoop(
        gamma1_mean=gamma1,
        actuator_channel_matrices=tuple(actuator_mats),
        sensor_channel_matrices=tuple(sensor_mats),
        actuator_variances=tuple(m.variance for m in d2),
        sensor_variances=tuple(m.variance for m in d1),
    )


def second_moment_operator(cl: ClosedLoop) -> SecondMomentOperator:
    """The exact one-step propagation operator of E[zeta zeta']."""
    g = cl.gamma1_mean
    t = np.kron(g, g)
    for mat, var in zip(cl.actuator_channel_matrices, cl.actuator_variances):
        if var != 0.0:
            t += var * np.kron(mat, mat)
    for mat, var in zip(cl.sensor_channel_matrices, cl.sensor_variances):
        if var != 0.0:
            t += var * np.kron(mat, mat)
    return SecondMomentOperator(matrix=t, state_dim=cl.state_dim)


def apply_operator(op: SecondMomentOperator, moment) -> np.ndarray:
    """One application: E[zeta zeta'] at the next step given the current one."""
    d = op.state_dim
    m = linalg.as_matrix(moment, "moment matrix")
    if m.shape != (d, d):
        raise linalg.LinalgError(f"moment matrix has shape {m.shape}, expected ({d}, {d})")
    return linalg.unvec(op.matrix @ linalg.vec(m), d, d)


def propagate_moments(op: SecondMomentOperator, moment0, steps: int) -> np.ndarray:
    """Propagate the second moment; returns shape (steps + 1, d, d)."""
    d = op.state_dim
    m0 = linalg.as_matrix(moment0, "initial moment matrix")
    if m0.shape != (d, d):
        raise linalg.LinalgError(
            f"initial moment matrix has shape {m0.shape}, expected ({d}, {d})"
        )
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    out = np.empty((steps + 1, d, d))
    out[0] = m0
    v = linalg.vec(m0)
    for k in range(1, steps + 1):
        v = op.matrix @ v
        out[k] = linalg.unvec(v, d, d)
    return out


def is_ms_stable(
    op: SecondMomentOperator, settings: NumericSettings = DEFAULT
) -> tuple[bool, float]:
    """Exponential mean-square stability test: rho(T) < 1 - margin.

    Returns (stable, rho); rho is also the decay factor of E[|zeta|^2].
    """
    rho = linalg.spectral_radius(op.matrix)
    return rho < 1.0 - settings.stability_margin, rho
