# svm01/linalg.py
"""
Dense kernels for the reduced systems the solver forms.

Matrices and vectors are plain float64 numpy arrays; the helpers here only
add the dimension/finiteness checks and the error mapping the solver relies on.
"""

from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from svm01.errors import InputError, NotPositiveDefinite

DenseMatrix = NDArray[np.float64]
DenseVector = NDArray[np.float64]
IndexSet = NDArray[np.intp]

SYMMETRY_RTOL = 1e-12


class SpectralNormEstimate(NamedTuple):
    estimate: float
    upper_bound: float


# ───────────────────────────────────────────────
# CONVERSION / VALIDATION
# ───────────────────────────────────────────────
def as_matrix(a: ArrayLike) -> DenseMatrix:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-d matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix has non-finite entries")
    return np.ascontiguousarray(arr)


def as_vector(v: ArrayLike) -> DenseVector:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"expected a 1-d vector, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InputError("vector has non-finite entries")
    return arr


def as_index_set(idx: Sequence[int] | NDArray, bound: int) -> IndexSet:
    arr = np.asarray(idx, dtype=np.intp).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= bound):
        raise InputError(f"index out of range [0, {bound})")
    return arr


# ───────────────────────────────────────────────
# SUBMATRICES
# ───────────────────────────────────────────────
def gather_submatrix(A: DenseMatrix, row_idx, col_idx) -> DenseMatrix:
    """A[row_idx][:, col_idx] with the given orders preserved."""
    rows = as_index_set(row_idx, A.shape[0])
    cols = as_index_set(col_idx, A.shape[1])
    return A[np.ix_(rows, cols)]


# ───────────────────────────────────────────────
# CHOLESKY
# ───────────────────────────────────────────────
def cholesky_factor(M: DenseMatrix):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"cholesky needs a square matrix, got {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and float(np.max(np.abs(M - M.T))) > SYMMETRY_RTOL * scale:
        raise InputError("matrix is not symmetric")
    try:
        return cho_factor(M, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def cholesky_solve_factored(factor, b: DenseVector) -> DenseVector:
    c, _ = factor
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != c.shape[0]:
        raise InputError(f"rhs length {b.shape[0]} != system size {c.shape[0]}")
    return cho_solve(factor, b, check_finite=False)


def cholesky_solve(M: DenseMatrix, b: DenseVector) -> DenseVector:
    b = as_vector(b)
    if np.asarray(M).shape[0] != b.shape[0]:
        raise InputError(f"rhs length {b.shape[0]} != system size {np.asarray(M).shape[0]}")
    return cholesky_solve_factored(cholesky_factor(M), b)


# ───────────────────────────────────────────────
# NORMS
# ───────────────────────────────────────────────
def norm_upper_bound(A: DenseMatrix) -> float:
    """sqrt(||A||_1 * ||A||_inf), never below ||A||_2."""
    if A.size == 0:
        return 0.0
    one = float(np.max(np.sum(np.abs(A), axis=0)))
    inf = float(np.max(np.sum(np.abs(A), axis=1)))
    return float(np.sqrt(one * inf))


def spectral_norm_estimate(A: DenseMatrix, iters: int, seed: int = 0) -> SpectralNormEstimate:
    """
    Power iteration on A^T A. The estimate is ||A x|| for unit x, so it never
    exceeds ||A||_2, and the running max keeps it nondecreasing in iters.
    """
    if iters < 1:
        raise InputError("iters must be >= 1")
    bound = norm_upper_bound(A)
    if A.size == 0 or bound == 0.0:
        return SpectralNormEstimate(0.0, 0.0)

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    best = 0.0
    for _ in range(iters):
        y = A.T @ (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            break
        x = y / ny
        best = max(best, float(np.linalg.norm(A @ x)))
    return SpectralNormEstimate(best, bound)


# ───────────────────────────────────────────────
# BLAS-1/2
# ───────────────────────────────────────────────
def matvec(A: DenseMatrix, x: DenseVector) -> DenseVector:
    if A.shape[1] != x.shape[0]:
        raise InputError(f"matvec: {A.shape} @ {x.shape}")
    return A @ x


def matvec_transpose(A: DenseMatrix, y: DenseVector) -> DenseVector:
    if A.shape[0] != y.shape[0]:
        raise InputError(f"matvec_transpose: {A.shape}^T @ {y.shape}")
    return A.T @ y


def dot(x: DenseVector, y: DenseVector) -> float:
    if x.shape != y.shape:
        raise InputError(f"dot: {x.shape} vs {y.shape}")
    return float(x @ y)


def axpy(a: float, x: DenseVector, y: DenseVector) -> DenseVector:
    if x.shape != y.shape:
        raise InputError(f"axpy: {x.shape} vs {y.shape}")
    return a * x + y


def norm2(x: DenseVector) -> float:
    return float(np.linalg.norm(x))
