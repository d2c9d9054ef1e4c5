"""Resilient output-feedback synthesis for stochastically attacked plants.

Given a discrete-time LTI plant whose sensor and actuator links each pass
the true signal with some probability and otherwise scale it by a random
injected factor, this package synthesizes observer-based controller gains
by semidefinite programming, certifies exponential mean-square stability
through the exact second-moment propagation operator, and cross-checks the
certificate by seeded Monte Carlo simulation.
"""

from .closedloop import (
    ClosedLoop,
    SecondMomentOperator,
    apply_operator,
    build_closed_loop,
    is_ms_stable,
    propagate_moments,
    second_moment_operator,
)
from .fileio import ConfigDocument, ConfigError, load_config, load_gains
from .model import (
    AttackChannel,
    AttackedSystem,
    Gains,
    PlantModel,
    ValidationError,
    validate,
)
from .moments import ChannelMoments, channel_moments, delta_matrices
from .sdp import AffineLmi, FeasibilityResult, solve_feasibility
from .settings import DEFAULT, NumericSettings
from .simulator import MsEstimate, SimConfig, TrajectoryRecord, monte_carlo, simulate_run
from .synthesis import (
    InfeasibleError,
    NumericalFailureError,
    SynthesisError,
    SynthesisResult,
    synthesize,
    verify_gains,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AffineLmi",
    "AttackChannel",
    "AttackedSystem",
    "ChannelMoments",
    "ClosedLoop",
    "ConfigDocument",
    "ConfigError",
    "DEFAULT",
    "FeasibilityResult",
    "Gains",
    "InfeasibleError",
    "MsEstimate",
    "NumericSettings",
    "NumericalFailureError",
    "PlantModel",
    "SecondMomentOperator",
    "SimConfig",
    "SynthesisError",
    "SynthesisResult",
    "TrajectoryRecord",
    "ValidationError",
    "apply_operator",
    "build_closed_loop",
    "channel_moments",
    "delta_matrices",
    "is_ms_stable",
    "load_config",
    "load_gains",
    "monte_carlo",
    "propagate_moments",
    "second_moment_operator",
    "simulate_run",
    "solve_feasibility",
    "synthesize",
    "validate",
    "verify_gains",
]
