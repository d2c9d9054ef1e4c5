"""Assembly of the controller/observer synthesis inequality.

The Lyapunov matrix is constrained to Q = diag(Q1, Q2) with
Q1 = U diag(Q11, Q22) U' aligned with the SVD of the input matrix B; this
structure is what makes the change of variables G = W K exactly invertible
(see synthesis.compute_w).  The decision variables (Q11, Q22, Q2, G, H) are
packed into one flat vector by upper-triangle/row-major enumeration, and the
affine coefficient matrices are produced by probing the block assembly with
unit assignments, which keeps packing and assembly trivially consistent
(off-diagonal symmetric entries pick up their doubled coefficient
automatically).

Strict positive definiteness of Q11, Q22 and Q2 is enforced by appending
-Q11, -Q22 and -Q2 as extra diagonal blocks to the main inequality, so one
solve yields one margin for the whole constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, model
from .model import AttackedSystem, ValidationError
from .moments import delta_matrices
from .sdp import AffineLmi
from .settings import DEFAULT, NumericSettings

__all__ = [
    "SvdStructure",
    "SynthesisVariables",
    "VariablePacking",
    "svd_structure",
    "q1_matrix",
    "constraint_matrix",
    "assemble",
    "recover_variables",
]

_SIGN_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class SvdStructure:
    """B = U [B0; 0] V' with U, V orthonormal and B0 diagonal positive."""

    U: np.ndarray
    B0: np.ndarray
    V: np.ndarray


@dataclass(frozen=True, eq=False)
class SynthesisVariables:
    """Named decision variables of the synthesis inequality.

    Q11 (m x m) and Q22 ((n-m) x (n-m)) are the SVD-aligned blocks of Q1;
    Q2 (n x n) is the observer Lyapunov block; G (m x n) and H (n x p) are
    the linearized gain variables.  Positive definiteness is part of the
    assembled inequality, not assumed here.
    """

    Q11: np.ndarray
    Q22: np.ndarray
    Q2: np.ndarray
    G: np.ndarray
    H: np.ndarray


def svd_structure(B, settings: NumericSettings = DEFAULT) -> SvdStructure:
    """Deterministic SVD factorization of a full-column-rank tall matrix.

    Singular values are sorted descending; the sign convention makes the
    first non-negligible entry of each column of U nonnegative (the paired
    column of V flips along), so the factorization is reproducible.
    """
    B = linalg.as_matrix(B, "B")
    n, m = B.shape
    if n < m:
        raise ValidationError(f"B has more columns ({m}) than rows ({n})")
    u, s, v = linalg.svd(B, settings)
    if m == 0 or s[m - 1] <= settings.rank_tol * s[0]:
        raise ValidationError("B is rank deficient; the SVD structure needs full column rank")
    u = u.copy()
    v = v.copy()
    for j in range(n):
        col = u[:, j]
        above = np.abs(col) > _SIGN_FLOOR * np.abs(col).max()
        lead = int(np.argmax(above))
        if col[lead] < 0.0:
            u[:, j] = -col
            if j < m:
                v[:, j] = -v[:, j]
    return SvdStructure(U=u, B0=np.diag(s[:m]), V=v)


@dataclass(frozen=True)
class VariablePacking:
    """Index map between the flat solver vector and the named variables.

    Order: upper triangle of Q11 row-major, then Q22, then Q2, then G
    row-major, then H row-major.
    """

    n: int
    m: int
    p: int

    @property
    def num_vars(self) -> int:
        n, m, p = self.n, self.m, self.p
        r = n - m
        return m * (m + 1) // 2 + r * (r + 1) // 2 + n * (n + 1) // 2 + m * n + n * p

    def pack(self, variables: SynthesisVariables) -> np.ndarray:
        out = []
        for sym, dim in (
            (variables.Q11, self.m),
            (variables.Q22, self.n - self.m),
            (variables.Q2, self.n),
        ):
            sym = np.asarray(sym, dtype=float)
            if sym.shape != (dim, dim):
                raise ValidationError(
                    f"symmetric block has shape {sym.shape}, expected ({dim}, {dim})"
                )
            for i in range(dim):
                for j in range(i, dim):
                    out.append(sym[i, j])
        for full, shape in (
            (variables.G, (self.m, self.n)),
            (variables.H, (self.n, self.p)),
        ):
            full = np.asarray(full, dtype=float)
            if full.shape != shape:
                raise ValidationError(f"gain block has shape {full.shape}, expected {shape}")
            out.extend(full.ravel(order="C"))
        return np.array(out)

    def unpack(self, x) -> SynthesisVariables:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.num_vars:
            raise ValidationError(
                f"variable vector has length {x.size}, expected {self.num_vars}"
            )
        pos = 0

        def take_symmetric(dim: int) -> np.ndarray:
            nonlocal pos
            out = np.zeros((dim, dim))
            for i in range(dim):
                for j in range(i, dim):
                    out[i, j] = x[pos]
                    out[j, i] = x[pos]
                    pos += 1
            return out

        def take_full(rows: int, cols: int) -> np.ndarray:
            nonlocal pos
            out = x[pos : pos + rows * cols].reshape((rows, cols))
            pos += rows * cols
            return out.copy()

        q11 = take_symmetric(self.m)
        q22 = take_symmetric(self.n - self.m)
        q2 = take_symmetric(self.n)
        g = take_full(self.m, self.n)
        h = take_full(self.n, self.p)
        return SynthesisVariables(Q11=q11, Q22=q22, Q2=q2, G=g, H=h)


def q1_matrix(svd: SvdStructure, Q11, Q22) -> np.ndarray:
    """Q1 = U diag(Q11, Q22) U', returned exactly symmetric."""
    n = svd.U.shape[0]
    m = svd.B0.shape[0]
    q11 = linalg.as_matrix(Q11, "Q11")
    q22 = linalg.as_matrix(Q22, "Q22")
    if q11.shape != (m, m) or q22.shape != (n - m, n - m):
        raise ValidationError(
            f"Q11/Q22 shapes {q11.shape}/{q22.shape} do not match the SVD partition"
        )
    core = np.zeros((n, n))
    core[:m, :m] = q11
    core[m:, m:] = q22
    q1 = svd.U @ core @ svd.U.T
    return 0.5 * (q1 + q1.T)


def _block_diag(*mats: np.ndarray) -> np.ndarray:
    mats = [m for m in mats if m.shape[0] > 0]
    dim = sum(m.shape[0] for m in mats)
    out = np.zeros((dim, dim))
    pos = 0
    for m in mats:
        d = m.shape[0]
        out[pos : pos + d, pos : pos + d] = m
        pos += d
    return out


def constraint_matrix(
    sys: AttackedSystem,
    svd: SvdStructure,
    variables: SynthesisVariables,
    settings: NumericSettings = DEFAULT,
) -> np.ndarray:
    """Value of the assembled synthesis constraint at named variables.

    Layout: the 6n x 6n block

        [[-Q,     Sigma1', Sigma2'],
         [Sigma1, -Q,      0      ],
         [Sigma2, 0,       -Q     ]]

    with Q = diag(Q1, Q2),
    Sigma1 = [[Q1 A + B D2m G, -B D2m G], [0, Q2 A - H D1m C]] and
    Sigma2 = [[B D2s G, B D2s G], [-H D1s C, 0]], where D1m/D2m are the
    diagonal channel-gain means and D1s/D2s the diagonal standard
    deviations, followed by the appended blocks -Q11, -Q22, -Q2.  The
    result is exactly symmetric for every variable assignment.
    """
    plant = sys.plant
    A, B, C = plant.A, plant.B, plant.C
    n = plant.n
    d1_mean, d1_std = delta_matrices(sys.sensor_channels, settings)
    d2_mean, d2_std = delta_matrices(sys.actuator_channels, settings)
    q11 = 0.5 * (variables.Q11 + variables.Q11.T)
    q22 = 0.5 * (variables.Q22 + variables.Q22.T)
    q2 = 0.5 * (variables.Q2 + variables.Q2.T)
    g = variables.G
    h = variables.H
    q1 = q1_matrix(svd, q11, q22)
    q = _block_diag(q1, q2)
    zero = np.zeros((n, n))
    bg_mean = B @ d2_mean @ g
    bg_std = B @ d2_std @ g
    sigma1 = linalg.block_matrix(
        [[q1 @ A + bg_mean, -bg_mean], [zero, q2 @ A - h @ d1_mean @ C]]
    )
    sigma2 = linalg.block_matrix(
        [[bg_std, bg_std], [-(h @ d1_std @ C), zero]]
    )
    zeros2n = np.zeros((2 * n, 2 * n))
    main = linalg.block_matrix(
        [
            [-q, sigma1.T, sigma2.T],
            [sigma1, -q, zeros2n],
            [sigma2, zeros2n, -q],
        ]
    )
    return _block_diag(main, -q11, -q22, -q2)


def assemble(
    sys: AttackedSystem, svd: SvdStructure, settings: NumericSettings = DEFAULT
) -> tuple[AffineLmi, VariablePacking]:
    """Build the affine inequality and the variable index map for a system.

    The constant term is exactly zero (the constraint is homogeneous); the
    coefficient of each packed variable is obtained by evaluating the block
    assembly at the corresponding unit assignment.
    """
    sys = model.validate(sys, settings)
    plant = sys.plant
    if svd.U.shape != (plant.n, plant.n) or svd.B0.shape != (plant.m, plant.m):
        raise ValidationError("SVD structure does not match the plant dimensions")
    packing = VariablePacking(n=plant.n, m=plant.m, p=plant.p)
    f0 = constraint_matrix(sys, svd, packing.unpack(np.zeros(packing.num_vars)), settings)
    coefficients = []
    for i in range(packing.num_vars):
        e = np.zeros(packing.num_vars)
        e[i] = 1.0
        coefficients.append(
            constraint_matrix(sys, svd, packing.unpack(e), settings) - f0
        )
    return AffineLmi(constant=f0, coefficients=tuple(coefficients)), packing


def recover_variables(x, packing: VariablePacking) -> SynthesisVariables:
    """Map a solver variable vector back to named matrices."""
    return packing.unpack(x)
