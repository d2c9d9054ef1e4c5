"""Shared numeric tolerances and solver settings.

A single frozen record threads through every module so one object controls
all tolerances.  Library defaults live in ``DEFAULT``; callers build
overridden copies with ``dataclasses.replace``, which is what the CLI does
for the config file's "solver" section.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericSettings:
    """Tolerances and limits used across validation, solving and simulation.

    Attributes
    ----------
    symmetry_tol:
        Relative tolerance when deciding whether a matrix is symmetric.
    svd_recon_tol:
        Relative bound on the SVD reconstruction error.
    singular_tol:
        ``solve`` and ``inverse`` reject matrices whose smallest singular
        value falls below ``singular_tol`` times the largest.
    solve_residual_tol:
        Relative residual bound enforced after every linear solve.
    rank_tol:
        Column-rank threshold applied to the plant input matrix.
    variance_clamp:
        Channel variances more negative than this are internal errors;
        smaller negative values are clamped to zero as roundoff.
    stability_margin:
        Strictness margin for the mean-square stability test rho < 1.
    eps_strict:
        Relative strict-feasibility threshold of the SDP solver; the
        absolute threshold is eps_strict times the coefficient scale.
    infeasibility_tol:
        Relative duality tolerance for certifying infeasibility.
    variable_bound:
        Box bound on LMI decision variables.  The synthesis inequality is
        homogeneous, so an explicit bound keeps the feasibility program
        bounded without changing which systems are feasible.
    max_iter:
        Interior-point iteration cap.
    w_condition_limit:
        Gain recovery aborts when cond(W) exceeds this.
    divergence_threshold:
        Simulated runs whose state magnitude exceeds this are flagged as
        diverged and frozen.
    chunk_runs:
        Monte Carlo batch size.  Fixed so that results are independent of
        the worker count.
    """

    symmetry_tol: float = 1e-9
    svd_recon_tol: float = 1e-10
    singular_tol: float = 1e-12
    solve_residual_tol: float = 1e-8
    rank_tol: float = 1e-10
    variance_clamp: float = 1e-14
    stability_margin: float = 1e-9
    eps_strict: float = 1e-8
    infeasibility_tol: float = 1e-7
    variable_bound: float = 1e4
    max_iter: int = 200
    w_condition_limit: float = 1e12
    divergence_threshold: float = 1e12
    chunk_runs: int = 4096


DEFAULT = NumericSettings()
