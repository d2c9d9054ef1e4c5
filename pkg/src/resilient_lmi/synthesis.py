"""End-to-end gain synthesis: LMI solve, gain recovery, certification.

Feasibility of the assembled inequality is a design device, not the final
word: the printed change-of-variables algebra is ambiguous in corner cases,
so every synthesized gain set is re-verified against the exact second-moment
operator before it is called certified.  A result can therefore come back
feasible-but-uncertified; callers (and the CLI exit codes) distinguish the
two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, model
from .closedloop import build_closed_loop, is_ms_stable, second_moment_operator
from .lmi import SvdStructure, SynthesisVariables, assemble, q1_matrix, recover_variables, svd_structure
from .model import AttackedSystem, Gains
from .sdp import FEASIBLE, INFEASIBLE, solve_feasibility
from .settings import DEFAULT, NumericSettings

__all__ = [
    "SynthesisError",
    "InfeasibleError",
    "NumericalFailureError",
    "SynthesisResult",
    "compute_w",
    "recover_gains",
    "synthesize",
    "verify_gains",
]


class SynthesisError(RuntimeError):
    """Synthesis pipeline failure."""


class InfeasibleError(SynthesisError):
    """The synthesis inequality is certifiably infeasible."""


class NumericalFailureError(SynthesisError):
    """The solver could not decide feasibility, or gain recovery broke down."""


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    """Gains plus certificates from one synthesis run.

    ``lmi_margin`` is the strict-feasibility margin of the solved
    inequality; ``oracle_rho`` the spectral radius of the second-moment
    operator under the recovered gains; ``certified`` is true iff
    oracle_rho passes the mean-square stability test.
    """

    gains: Gains
    variables: SynthesisVariables
    W: np.ndarray
    Q1: np.ndarray
    lmi_margin: float
    oracle_rho: float
    certified: bool
    w_condition: float
    iterations: int


def compute_w(svd: SvdStructure, Q11, settings: NumericSettings = DEFAULT) -> np.ndarray:
    """W = (B0 V')^-1 Q11 (B0 V'); satisfies B W = Q1 B for any Q22 block."""
    q11 = linalg.as_matrix(Q11, "Q11")
    t = svd.B0 @ svd.V.T
    return linalg.solve(t, q11 @ t, settings)


def recover_gains(
    svd: SvdStructure, variables: SynthesisVariables, settings: NumericSettings = DEFAULT
) -> tuple[Gains, np.ndarray, float]:
    """Invert the change of variables: K = W^-1 G and L = Q2^-1 H.

    Returns (gains, W, cond(W)).  Raises NumericalFailureError when W is too
    ill-conditioned for the inversion to be trustworthy.
    """
    w = compute_w(svd, variables.Q11, settings)
    w_condition = linalg.condition_number(w)
    if not np.isfinite(w_condition) or w_condition > settings.w_condition_limit:
        raise NumericalFailureError(
            f"recovered W is numerically singular (condition {w_condition:.3e})"
        )
    try:
        k = linalg.solve(w, variables.G, settings)
        l = linalg.solve(variables.Q2, variables.H, settings)
    except linalg.SingularMatrixError as exc:
        raise NumericalFailureError(f"gain recovery failed: {exc}") from None
    return Gains(K=k, L=l), w, w_condition


def synthesize(sys: AttackedSystem, settings: NumericSettings = DEFAULT) -> SynthesisResult:
    """Solve the synthesis inequality and certify the recovered gains.

    Raises InfeasibleError when the inequality is certifiably infeasible
    (no resilient controller at these attack statistics) and
    NumericalFailureError when the solver stalls or recovery breaks down.
    A feasible solve always returns a result; ``certified`` records whether
    the independent oracle confirms mean-square stability.
    """
    sys = model.validate(sys, settings)
    svd = svd_structure(sys.plant.B, settings)
    problem, packing = assemble(sys, svd, settings)
    outcome = solve_feasibility(problem, settings)
    if outcome.status == INFEASIBLE:
        raise InfeasibleError("no resilient controller found at these attack statistics")
    if outcome.status != FEASIBLE:
        raise NumericalFailureError(
            f"feasibility solve failed after {outcome.iterations} iterations"
        )
    variables = recover_variables(outcome.x, packing)
    gains, w, w_condition = recover_gains(svd, variables, settings)
    rho, stable = verify_gains(sys, gains, settings)
    return SynthesisResult(
        gains=gains,
        variables=variables,
        W=w,
        Q1=q1_matrix(svd, variables.Q11, variables.Q22),
        lmi_margin=float(outcome.margin),
        oracle_rho=rho,
        certified=stable,
        w_condition=w_condition,
        iterations=outcome.iterations,
    )


def verify_gains(
    sys: AttackedSystem, gains: Gains, settings: NumericSettings = DEFAULT
) -> tuple[float, bool]:
    """Mean-square stability of the loop closed with the given gains.

    Returns (rho, stable) from the second-moment operator; the judgement is
    independent of how the gains were obtained.
    """
    sys = model.validate(sys, settings)
    op = second_moment_operator(build_closed_loop(sys, gains, settings))
    stable, rho = is_ms_stable(op, settings)
    return rho, stable
