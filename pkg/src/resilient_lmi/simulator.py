"""Seeded Monte Carlo simulation of the attacked closed loop.

Every run draws its randomness from an independent counter-based stream
(Philox) keyed by (seed, run index), so any subset of runs sees the same
attack realizations in any execution order.  Runs are advanced in
fixed-size batches vectorized across runs; batch size is a fixed algorithm
parameter (settings.chunk_runs), not a function of the worker count, and
aggregation reduces the batches in run-index order, so repeated identical
calls are bit-identical regardless of parallelism.  The worker count is
capped by the RESILIENT_LMI_THREADS environment variable.  Re-simulating a
run inside a differently shaped batch reproduces the same draws and the
same trajectory up to last-bit rounding of the batched matrix products.

Per step, in equation order: sample the sensor draws, form the attacked
measurement, sample the actuator draws, form the attacked input from the
current observer state, then advance observer and plant.  The observer uses
the mean-compensated innovation

    xhat(k+1) = A xhat(k) + B u(k) + L (ytilde(k) - D1m C xhat(k))

with D1m the diagonal matrix of sensor channel-gain means, which is the
update whose error dynamics match the mean closed loop of the closedloop
module.  Attack draws and signals are also emitted for the final step (with
no state update after it), so a record over N steps carries N+1 complete
rows.
"""

from __future__ import annotations

import math
import operator
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import AttackedSystem, Gains, ValidationError, check_gains, validate
from .moments import channel_moments
from .settings import DEFAULT, NumericSettings

__all__ = [
    "THREADS_ENV_VAR",
    "SimConfig",
    "TrajectoryRecord",
    "MsEstimate",
    "simulate_run",
    "monte_carlo",
    "empirical_second_moments",
]

THREADS_ENV_VAR = "RESILIENT_LMI_THREADS"

_MASK64 = (1 << 64) - 1
_MS_FLOOR = 1e-12
_UNIFORM_EPS = 1e-16


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Run count, horizon, seed and initial conditions for a simulation."""

    steps: int
    runs: int
    seed: int
    x0: np.ndarray
    xhat0: np.ndarray

    def __post_init__(self):
        for name in ("steps", "runs", "seed"):
            value = getattr(self, name)
            try:
                value = operator.index(value)
            except TypeError:
                raise ValidationError(f"{name} must be an integer, got {value!r}") from None
            object.__setattr__(self, name, value)
        if self.steps < 1:
            raise ValidationError(f"steps must be at least 1, got {self.steps}")
        if self.runs < 1:
            raise ValidationError(f"runs must be at least 1, got {self.runs}")
        x0 = _state_vector(self.x0, "x0")
        xhat0 = _state_vector(self.xhat0, "xhat0")
        if x0.size != xhat0.size:
            raise ValidationError(
                f"x0 has length {x0.size} but xhat0 has length {xhat0.size}"
            )
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xhat0", xhat0)


def _state_vector(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValidationError(f"{name} must be a nonempty 1-D vector")
    if not np.isfinite(v).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return v.copy()


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One run's states, signals and attack realizations, steps 0..N.

    ``alpha``/``gamma`` are the 0/1 link indicators (1 = clean), ``beta``/
    ``delta`` the injected factors drawn that step (applied only where the
    indicator is 0).  ``diverged_step`` is the first step whose state update
    would have exceeded the divergence threshold; from there on the state is
    held frozen and excluded from aggregates.
    """

    run_index: int
    x: np.ndarray
    xhat: np.ndarray
    u: np.ndarray
    ytilde: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    diverged: bool
    diverged_step: int | None


@dataclass(frozen=True, eq=False)
class MsEstimate:
    """Empirical mean-square decay over a batch of runs.

    ``mean_square[k]`` averages |zeta(k)|^2 = |x(k)|^2 + |x(k) - xhat(k)|^2
    over the runs still valid at step k (``valid_runs[k]`` of them).
    ``decay_slope`` is the least-squares slope of log mean_square over the
    window [steps//4, last k above 1e-12], NaN when fewer than two points
    qualify.  ``usable`` is false when no run survives to the final step.
    """

    mean_square: np.ndarray
    valid_runs: np.ndarray
    decay_slope: float
    empirically_stable: bool
    usable: bool
    trajectories: tuple[TrajectoryRecord, ...] | None = None


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ValidationError(
            f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}"
        ) from None
    if count < 1:
        raise ValidationError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return count


def _uniform_block(seed: int, run_index: int, rows: int, width: int) -> np.ndarray:
    key = np.random.SeedSequence([seed & _MASK64, run_index])
    return np.random.Generator(np.random.Philox(key)).random((rows, width))


def _injection_values(u: np.ndarray, channels) -> np.ndarray:
    """Transform uniform draws into injected factors, channel by channel.

    Constant channels consume their draw but ignore it, so the column layout
    (and therefore every other channel's stream) never depends on the
    distribution choices.
    """
    out = np.empty_like(u)
    for i, ch in enumerate(channels):
        col = u[..., i]
        if ch.injection_distribution == "uniform":
            half = math.sqrt(3.0 * ch.injection_variance)
            out[..., i] = ch.injection_mean + (2.0 * col - 1.0) * half
        elif ch.injection_distribution == "gaussian":
            std = math.sqrt(ch.injection_variance)
            out[..., i] = ch.injection_mean + std * ndtri(
                np.clip(col, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)
            )
        else:
            out[..., i] = ch.injection_mean
    return out


def _check_inputs(sys: AttackedSystem, gains: Gains, cfg: SimConfig, settings) -> None:
    validate(sys, settings)
    check_gains(sys.plant, gains)
    if cfg.x0.size != sys.plant.n:
        raise ValidationError(
            f"x0 has length {cfg.x0.size}, expected {sys.plant.n} to match the plant"
        )


def _simulate_batch(
    sys: AttackedSystem,
    gains: Gains,
    cfg: SimConfig,
    run_indices: np.ndarray,
    settings: NumericSettings,
    keep_trajectories: bool,
    want_moments: bool,
) -> dict:
    plant = sys.plant
    a_mat, b_mat, c_mat = plant.A, plant.B, plant.C
    k_mat, l_mat = gains.K, gains.L
    n, m, p = plant.n, plant.m, plant.p
    steps = cfg.steps
    runs = len(run_indices)
    width = 2 * (p + m)
    threshold = settings.divergence_threshold

    sensor_bernoulli = np.array([ch.bernoulli_mean for ch in sys.sensor_channels])
    actuator_bernoulli = np.array([ch.bernoulli_mean for ch in sys.actuator_channels])
    d1_mean = np.array([channel_moments(ch, settings).mean for ch in sys.sensor_channels])

    uniforms = np.empty((runs, steps + 1, width))
    for r, run_index in enumerate(run_indices):
        uniforms[r] = _uniform_block(cfg.seed, int(run_index), steps + 1, width)
    alpha = (uniforms[:, :, :p] < sensor_bernoulli).astype(float)
    beta = _injection_values(uniforms[:, :, p : 2 * p], sys.sensor_channels)
    gamma = (uniforms[:, :, 2 * p : 2 * p + m] < actuator_bernoulli).astype(float)
    delta = _injection_values(uniforms[:, :, 2 * p + m :], sys.actuator_channels)

    x = np.tile(cfg.x0, (runs, 1))
    xhat = np.tile(cfg.xhat0, (runs, 1))
    diverged_step = np.full(runs, -1, dtype=np.int64)
    alive = np.ones(runs, dtype=bool)
    initial_bad = (np.abs(x).max(axis=1) > threshold) | (
        np.abs(xhat).max(axis=1) > threshold
    )
    diverged_step[initial_bad] = 0
    alive &= ~initial_bad

    ms = np.empty((runs, steps + 1))
    if keep_trajectories:
        traj_x = np.empty((runs, steps + 1, n))
        traj_xhat = np.empty((runs, steps + 1, n))
        traj_u = np.empty((runs, steps + 1, m))
        traj_ytilde = np.empty((runs, steps + 1, p))
    if want_moments:
        moment_sums = np.zeros((steps + 1, 2 * n, 2 * n))
        moment_counts = np.zeros(steps + 1, dtype=np.int64)

    for k in range(steps + 1):
        cx = x @ c_mat.T
        ytilde = (alpha[:, k] + (1.0 - alpha[:, k]) * beta[:, k]) * cx
        kx = xhat @ k_mat.T
        u = (gamma[:, k] + (1.0 - gamma[:, k]) * delta[:, k]) * kx
        err = x - xhat
        ms[:, k] = np.einsum("ri,ri->r", x, x) + np.einsum("ri,ri->r", err, err)
        if keep_trajectories:
            traj_x[:, k] = x
            traj_xhat[:, k] = xhat
            traj_u[:, k] = u
            traj_ytilde[:, k] = ytilde
        if want_moments and alive.any():
            zeta = np.concatenate([x[alive], err[alive]], axis=1)
            moment_sums[k] = zeta.T @ zeta
            moment_counts[k] = zeta.shape[0]
        if k == steps:
            break
        innovation = ytilde - (xhat @ c_mat.T) * d1_mean
        xhat_next = xhat @ a_mat.T + u @ b_mat.T + innovation @ l_mat.T
        x_next = x @ a_mat.T + u @ b_mat.T
        bad = alive & (
            (np.abs(x_next).max(axis=1) > threshold)
            | (np.abs(xhat_next).max(axis=1) > threshold)
        )
        if bad.any():
            diverged_step[bad] = k + 1
        advance = alive & ~bad
        x = np.where(advance[:, None], x_next, x)
        xhat = np.where(advance[:, None], xhat_next, xhat)
        alive &= ~bad

    out = {"ms": ms, "diverged_step": diverged_step}
    if keep_trajectories:
        out.update(
            x=traj_x,
            xhat=traj_xhat,
            u=traj_u,
            ytilde=traj_ytilde,
            alpha=alpha,
            gamma=gamma,
            beta=beta,
            delta=delta,
        )
    if want_moments:
        out.update(moment_sums=moment_sums, moment_counts=moment_counts)
    return out


def _run_chunks(
    sys: AttackedSystem,
    gains: Gains,
    cfg: SimConfig,
    settings: NumericSettings,
    keep_trajectories: bool,
    want_moments: bool,
) -> list[dict]:
    chunk = max(1, int(settings.chunk_runs))
    starts = list(range(0, cfg.runs, chunk))

    def work(start: int) -> dict:
        indices = np.arange(start, min(start + chunk, cfg.runs))
        return _simulate_batch(
            sys, gains, cfg, indices, settings, keep_trajectories, want_moments
        )

    workers = min(_worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, starts))
    return [work(start) for start in starts]


def _validity(diverged_step: np.ndarray, steps: int) -> np.ndarray:
    ks = np.arange(steps + 1)
    return (diverged_step[:, None] == -1) | (ks[None, :] < diverged_step[:, None])


def _decay_slope(mean_square: np.ndarray, valid_runs: np.ndarray) -> float:
    steps = mean_square.size - 1
    positive = (mean_square > _MS_FLOOR) & (valid_runs > 0)
    if not positive.any():
        return float("nan")
    hi = int(np.nonzero(positive)[0][-1])
    lo = steps // 4
    ks = np.nonzero(positive[: hi + 1])[0]
    ks = ks[ks >= lo]
    if ks.size < 2:
        return float("nan")
    return float(np.polyfit(ks, np.log(mean_square[ks]), 1)[0])


def _record_from_batch(batch: dict, offset: int, run_index: int) -> TrajectoryRecord:
    div = int(batch["diverged_step"][offset])
    return TrajectoryRecord(
        run_index=run_index,
        x=batch["x"][offset].copy(),
        xhat=batch["xhat"][offset].copy(),
        u=batch["u"][offset].copy(),
        ytilde=batch["ytilde"][offset].copy(),
        alpha=batch["alpha"][offset].astype(np.int64),
        gamma=batch["gamma"][offset].astype(np.int64),
        beta=batch["beta"][offset].copy(),
        delta=batch["delta"][offset].copy(),
        diverged=div >= 0,
        diverged_step=div if div >= 0 else None,
    )


def simulate_run(
    sys: AttackedSystem,
    gains: Gains,
    cfg: SimConfig,
    run_index: int,
    settings: NumericSettings = DEFAULT,
) -> TrajectoryRecord:
    """Simulate a single run of the attacked loop.

    ``run_index`` keys the run's random stream together with ``cfg.seed``;
    it is independent of ``cfg.runs``.
    """
    _check_inputs(sys, gains, cfg, settings)
    if run_index < 0:
        raise ValidationError(f"run_index must be nonnegative, got {run_index}")
    batch = _simulate_batch(
        sys,
        gains,
        cfg,
        np.array([run_index]),
        settings,
        keep_trajectories=True,
        want_moments=False,
    )
    return _record_from_batch(batch, 0, run_index)


def monte_carlo(
    sys: AttackedSystem,
    gains: Gains,
    cfg: SimConfig,
    keep_trajectories: bool = False,
    settings: NumericSettings = DEFAULT,
) -> MsEstimate:
    """Average mean-square decay over cfg.runs independent runs.

    Runs are indexed 0..runs-1.  Diverged runs are excluded from the
    averages from their divergence step onward; the estimate is flagged
    unusable when no run survives to the final step.  With
    ``keep_trajectories`` the per-run records are retained on the estimate.
    """
    _check_inputs(sys, gains, cfg, settings)
    batches = _run_chunks(sys, gains, cfg, settings, keep_trajectories, False)
    ms = np.concatenate([b["ms"] for b in batches], axis=0)
    diverged_step = np.concatenate([b["diverged_step"] for b in batches])
    valid = _validity(diverged_step, cfg.steps)
    valid_runs = valid.sum(axis=0)
    sums = np.where(valid, ms, 0.0).sum(axis=0)
    mean_square = np.where(valid_runs > 0, sums / np.maximum(valid_runs, 1), 0.0)
    usable = bool(valid_runs[-1] > 0)
    slope = _decay_slope(mean_square, valid_runs)
    stable = usable and (
        (math.isfinite(slope) and slope < 0.0) or mean_square[-1] <= _MS_FLOOR
    )
    trajectories = None
    if keep_trajectories:
        records = []
        run_index = 0
        for batch in batches:
            for offset in range(batch["ms"].shape[0]):
                records.append(_record_from_batch(batch, offset, run_index))
                run_index += 1
        trajectories = tuple(records)
    return MsEstimate(
        mean_square=mean_square,
        valid_runs=valid_runs,
        decay_slope=slope,
        empirically_stable=stable,
        usable=usable,
        trajectories=trajectories,
    )


def empirical_second_moments(
    sys: AttackedSystem,
    gains: Gains,
    cfg: SimConfig,
    settings: NumericSettings = DEFAULT,
) -> np.ndarray:
    """Empirical E[zeta(k) zeta(k)'] over runs, shape (steps + 1, 2n, 2n).

    zeta = (x, x - xhat).  Diverged runs are excluded from their divergence
    step onward; steps with no valid runs come back as zero matrices.
    """
    _check_inputs(sys, gains, cfg, settings)
    batches = _run_chunks(sys, gains, cfg, settings, False, True)
    sums = sum(b["moment_sums"] for b in batches)
    counts = sum(b["moment_counts"] for b in batches)
    scale = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    return sums * scale[:, None, None]
