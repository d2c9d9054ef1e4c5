"""Strict feasibility of small dense affine matrix inequalities.

Feasibility of F0 + sum_i x_i Fi < 0 is decided through the auxiliary
program minimizing t subject to F(x) <= t*I over a box |x_i| <= bound; the
box keeps homogeneous inequalities (such as the synthesis LMI) bounded
without changing which problems are strictly feasible.  The interior-point
solve is delegated to cvxopt, but acceptance of its answer is not: a
returned point counts as feasible only after an independent eigenvalue
re-check, and infeasibility is reported only with a duality-certified lower
bound on t.  Iteration stalls map to numerical_failure, never to
infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxopt
import cvxopt.solvers
import numpy as np

from . import linalg
from .settings import DEFAULT, NumericSettings

__all__ = [
    "FEASIBLE",
    "INFEASIBLE",
    "NUMERICAL_FAILURE",
    "AffineLmi",
    "FeasibilityResult",
    "evaluate",
    "solve_feasibility",
]

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True, eq=False)
class AffineLmi:
    """The affine constraint F0 + sum_i x_i Fi < 0 (negative definite).

    ``constant`` is F0 and ``coefficients`` the per-variable Fi; all must be
    symmetric matrices of one common dimension.  Stored matrices are
    symmetrized exactly as (M + M')/2.
    """

    constant: np.ndarray
    coefficients: tuple[np.ndarray, ...]

    def __post_init__(self):
        f0 = linalg.as_matrix(self.constant, "constant term")
        _require_symmetric_term(f0, "constant term")
        coeffs = []
        for i, fi in enumerate(self.coefficients):
            fi = linalg.as_matrix(fi, f"coefficient {i}")
            _require_symmetric_term(fi, f"coefficient {i}")
            if fi.shape != f0.shape:
                raise linalg.LinalgError(
                    f"coefficient {i} has shape {fi.shape}, expected {f0.shape}"
                )
            coeffs.append(0.5 * (fi + fi.T))
        object.__setattr__(self, "constant", 0.5 * (f0 + f0.T))
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @property
    def dimension(self) -> int:
        return self.constant.shape[0]

    @property
    def num_vars(self) -> int:
        return len(self.coefficients)


def _require_symmetric_term(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise linalg.LinalgError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()) if m.size else 0.0)
    if m.size and float(np.abs(m - m.T).max()) > DEFAULT.symmetry_tol * scale:
        raise linalg.LinalgError(f"{name} is not symmetric")


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    """Outcome of a strict-feasibility solve.

    ``margin`` is -lambda_max(F(x)) recomputed by an eigenvalue check at the
    returned point, not taken from solver internals.  ``objective`` and
    ``dual_objective`` echo the solver's optimal t and its certified lower
    bound, for diagnostics.
    """

    status: str
    x: np.ndarray | None
    margin: float | None
    iterations: int
    objective: float | None
    dual_objective: float | None


def evaluate(lmi: AffineLmi, x) -> np.ndarray:
    """F(x) = F0 + sum_i x_i Fi."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != lmi.num_vars:
        raise linalg.LinalgError(
            f"variable vector has length {x.size}, expected {lmi.num_vars}"
        )
    f = lmi.constant.copy()
    for xi, fi in zip(x, lmi.coefficients):
        f += xi * fi
    return f


def _coefficient_scale(lmi: AffineLmi) -> float:
    norms = [float(np.linalg.norm(fi, 2)) for fi in lmi.coefficients]
    scale = max(norms, default=0.0)
    if scale == 0.0:
        scale = max(float(np.linalg.norm(lmi.constant, 2)), 1.0)
    return scale


def solve_feasibility(
    lmi: AffineLmi, settings: NumericSettings = DEFAULT
) -> FeasibilityResult:
    """Decide strict feasibility of the inequality.

    Solves min t s.t. F(x) <= t*I, |x_i| <= settings.variable_bound with
    cvxopt's SDP interior point (deterministic; bit-identical answers for
    identical inputs and settings).  Classification of the outcome:

    - feasible: the returned point satisfies
      lambda_max(F(x)) < -eps_strict * scale by the independent eigenvalue
      re-check (scale = max_i ||Fi||_2);
    - infeasible: the dual objective certifies
      t* >= -infeasibility_tol * scale;
    - numerical_failure: anything else, including iteration stalls.

    Intended for desk-scale problems (dimension up to ~200, a few thousand
    variables).
    """
    nv = lmi.num_vars
    dim = lmi.dimension
    scale = _coefficient_scale(lmi)
    eps = settings.eps_strict * scale

    cost = cvxopt.matrix([0.0] * nv + [1.0])
    columns = [fi.flatten(order="F") for fi in lmi.coefficients]
    columns.append((-np.eye(dim)).flatten(order="F"))
    gs = [cvxopt.matrix(np.column_stack(columns))]
    hs = [cvxopt.matrix(-lmi.constant)]
    gl = hl = None
    if nv:
        box = np.zeros((2 * nv, nv + 1))
        box[:nv, :nv] = np.eye(nv)
        box[nv:, :nv] = -np.eye(nv)
        gl = cvxopt.matrix(box)
        hl = cvxopt.matrix(np.full(2 * nv, float(settings.variable_bound)))

    options = {"show_progress": False, "maxiters": int(settings.max_iter)}
    sol = cvxopt.solvers.sdp(cost, Gl=gl, hl=hl, Gs=gs, hs=hs, options=options)

    iterations = int(sol.get("iterations", 0) or 0)
    objective = sol.get("primal objective")
    dual = sol.get("dual objective")
    objective = None if objective is None else float(objective)
    dual = None if dual is None else float(dual)

    x = None
    lam = None
    if sol.get("x") is not None:
        x = np.asarray(sol["x"]).ravel()[:nv].copy()
        lam = float(linalg.sym_eig(evaluate(lmi, x), settings)[-1]) if dim else 0.0

    if lam is not None and lam < -eps:
        return FeasibilityResult(FEASIBLE, x, -lam, iterations, objective, dual)
    if (
        sol.get("status") == "optimal"
        and dual is not None
        and dual >= -settings.infeasibility_tol * scale
    ):
        return FeasibilityResult(INFEASIBLE, None, None, iterations, objective, dual)
    return FeasibilityResult(NUMERICAL_FAILURE, None, None, iterations, objective, dual)
