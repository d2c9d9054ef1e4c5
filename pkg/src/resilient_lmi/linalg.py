"""Dense linear algebra kernel used by every other module.

Thin validated wrappers over NumPy/LAPACK.  Each operation coerces its input
to a finite float64 matrix, enforces the numeric contracts of this project
(reconstruction and residual bounds, symmetry gates, singularity thresholds)
and raises typed errors instead of returning garbage on degenerate input.
"""

from __future__ import annotations

import numpy as np

from .settings import DEFAULT, NumericSettings

__all__ = [
    "LinalgError",
    "SingularMatrixError",
    "as_matrix",
    "as_vector",
    "matmul",
    "transpose",
    "kron",
    "vec",
    "unvec",
    "svd",
    "sym_eig",
    "spectral_radius",
    "solve",
    "inverse",
    "cholesky",
    "condition_number",
    "block_matrix",
]

_TINY = np.finfo(float).tiny


class LinalgError(ValueError):
    """Invalid input to a matrix operation."""


class SingularMatrixError(LinalgError):
    """Matrix numerically singular; carries the condition estimate."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise LinalgError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise LinalgError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting NaN/Inf entries."""
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise LinalgError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise LinalgError(f"{name} contains non-finite entries")
    return v


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise LinalgError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "left operand"), as_matrix(b, "right operand"))


def vec(m) -> np.ndarray:
    """Column-major vectorization; pairs with kron via vec(AMB') = (B kron A) vec(M)."""
    return as_matrix(m).flatten(order="F")


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of vec: reshape a flat vector to (rows, cols) column-major."""
    if cols is None:
        cols = rows
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != rows * cols:
        raise LinalgError(f"cannot reshape {v.shape} to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def _require_square(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {m.shape}")


def _require_symmetric(m: np.ndarray, settings: NumericSettings, name: str) -> None:
    _require_square(m, name)
    if m.size == 0:
        return
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > settings.symmetry_tol * scale:
        raise LinalgError(f"{name} is not symmetric within tolerance")


def svd(m, settings: NumericSettings = DEFAULT):
    """Full SVD m = U diag(S) V' with orthonormal U, V and S nonincreasing.

    The reconstruction is checked against ``settings.svd_recon_tol`` relative
    to the Frobenius norm of the input.
    """
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=True)
    v = vt.T
    k = s.size
    recon = (u[:, :k] * s) @ v[:, :k].T
    norm = float(np.linalg.norm(m))
    if float(np.linalg.norm(recon - m)) > settings.svd_recon_tol * max(norm, _TINY):
        raise LinalgError("SVD reconstruction error exceeds tolerance")
    return u, s, v


def sym_eig(m, settings: NumericSettings = DEFAULT) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted ascending.

    The input must be symmetric within ``settings.symmetry_tol`` (relative to
    its largest entry); it is symmetrized as (M + M')/2 before decomposition
    to suppress roundoff drift from block assembly.
    """
    m = as_matrix(m)
    _require_symmetric(m, settings, "sym_eig input")
    if m.size == 0:
        return np.empty(0)
    return np.linalg.eigvalsh(0.5 * (m + m.T))


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    m = as_matrix(m)
    _require_square(m, "spectral_radius input")
    if m.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(m)).max())


def solve(a, b, settings: NumericSettings = DEFAULT) -> np.ndarray:
    """Solve a @ x = b for square a, with a singularity gate and residual check.

    Accepts a matrix or vector right-hand side and returns the same shape.
    Raises SingularMatrixError when the smallest singular value of ``a``
    falls below ``settings.singular_tol`` times the largest, or when the
    residual cannot be brought under ``settings.solve_residual_tol``
    relative to the right-hand side (one refinement pass is attempted).
    """
    a = as_matrix(a, "coefficient matrix")
    _require_square(a, "coefficient matrix")
    b_arr = np.asarray(b, dtype=float)
    if not np.isfinite(b_arr).all():
        raise LinalgError("right-hand side contains non-finite entries")
    is_vector = b_arr.ndim == 1
    bm = b_arr[:, None] if is_vector else b_arr
    if bm.ndim != 2 or bm.shape[0] != a.shape[0]:
        raise LinalgError(
            f"right-hand side shape {b_arr.shape} does not match matrix {a.shape}"
        )
    s = np.linalg.svd(a, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if s.size else 0.0
    cond = smax / smin if smin > 0.0 else float("inf")
    if smin <= settings.singular_tol * max(smax, _TINY):
        raise SingularMatrixError(
            f"matrix is singular to working precision (condition estimate {cond:.3e})",
            cond,
        )
    x = np.linalg.solve(a, bm)
    bnorm = float(np.linalg.norm(bm))
    residual = float(np.linalg.norm(bm - a @ x))
    if residual > settings.solve_residual_tol * max(bnorm, _TINY):
        x = x + np.linalg.solve(a, bm - a @ x)
        residual = float(np.linalg.norm(bm - a @ x))
        if residual > settings.solve_residual_tol * max(bnorm, _TINY):
            raise SingularMatrixError(
                f"linear solve residual {residual:.3e} exceeds tolerance "
                f"(condition estimate {cond:.3e})",
                cond,
            )
    return x[:, 0] if is_vector else x


def inverse(a, settings: NumericSettings = DEFAULT) -> np.ndarray:
    a = as_matrix(a)
    _require_square(a, "inverse input")
    return solve(a, np.eye(a.shape[0]), settings)


def cholesky(a, settings: NumericSettings = DEFAULT) -> np.ndarray:
    """Lower-triangular Cholesky factor; fails iff the input is not PD."""
    a = as_matrix(a)
    _require_symmetric(a, settings, "cholesky input")
    try:
        return np.linalg.cholesky(0.5 * (a + a.T))
    except np.linalg.LinAlgError:
        raise LinalgError("matrix is not positive definite") from None


def condition_number(a) -> float:
    """Two-norm condition number estimate via singular values."""
    s = np.linalg.svd(as_matrix(a), compute_uv=False)
    if s.size == 0:
        return 1.0
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def block_matrix(grid) -> np.ndarray:
    """Assemble a matrix from a row-major grid (nested sequence) of blocks.

    Block shapes must be consistent: equal heights within each block-row and
    equal widths within each block-column.
    """
    if not grid or not grid[0]:
        raise LinalgError("block grid is empty")
    rows = [
        [as_matrix(blk, f"block ({i},{j})") for j, blk in enumerate(row)]
        for i, row in enumerate(grid)
    ]
    ncols = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise LinalgError(f"block row {i} has {len(row)} blocks, expected {ncols}")
    heights = [row[0].shape[0] for row in rows]
    widths = [blk.shape[1] for blk in rows[0]]
    for i, row in enumerate(rows):
        for j, blk in enumerate(row):
            if blk.shape != (heights[i], widths[j]):
                raise LinalgError(
                    f"block ({i},{j}) has shape {blk.shape}, "
                    f"expected ({heights[i]}, {widths[j]})"
                )
    return np.block(rows)
