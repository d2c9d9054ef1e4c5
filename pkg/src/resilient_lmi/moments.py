"""First and second moments of the effective per-channel attack gain.

At every step a channel transmits z * s where s is the true signal and
z = alpha + (1 - alpha) * beta, with alpha the Bernoulli link indicator and
beta the independent injected factor; z collapses to 1 when the link is
clean.  Because alpha is an indicator (alpha**2 == alpha and
alpha * (1 - alpha) == 0), both moments of z have exact closed forms in the
channel statistics.  These are used instead of the generic
product-of-independent-variables identities, whose term-by-term application
ignores that the summands of z share alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AttackChannel, ValidationError
from .settings import DEFAULT, NumericSettings

__all__ = ["ChannelMoments", "channel_moments", "delta_matrices"]


@dataclass(frozen=True)
class ChannelMoments:
    """Mean, variance and standard deviation of one channel's effective gain."""

    mean: float
    variance: float
    std: float


def channel_moments(ch: AttackChannel, settings: NumericSettings = DEFAULT) -> ChannelMoments:
    """Exact moments of z = alpha + (1 - alpha) * beta.

    mean = a + (1 - a) * b and E[z**2] = a + (1 - a) * (b**2 + v) for
    Bernoulli mean a, injection mean b and injection variance v.  Roundoff
    can push the variance slightly negative; within ``variance_clamp`` it is
    clamped to zero, beyond that it is an internal error.
    """
    a = ch.bernoulli_mean
    b = ch.injection_mean
    v = ch.injection_variance
    mean = a + (1.0 - a) * b
    second = a + (1.0 - a) * (b * b + v)
    variance = second - mean * mean
    if variance < 0.0:
        if variance < -settings.variance_clamp:
            raise ArithmeticError(
                f"channel variance {variance!r} is negative beyond roundoff"
            )
        variance = 0.0
    return ChannelMoments(mean=mean, variance=variance, std=math.sqrt(variance))


def delta_matrices(channels, settings: NumericSettings = DEFAULT):
    """Diagonal mean and standard-deviation matrices for a channel list.

    Returns (mean_diag, std_diag) in channel order; these are the constant
    matrices entering the synthesis inequality.
    """
    channels = tuple(channels)
    if not channels:
        raise ValidationError("channel list is empty")
    moms = [channel_moments(ch, settings) for ch in channels]
    return np.diag([m.mean for m in moms]), np.diag([m.std for m in moms])
