# svm01/proxops.py
"""
The two combinatorial operators of the method:

- s-sparse projection (keep the s largest magnitudes)
- proximal map of the 0/1 loss (positive hard-thresholding)

plus the Moreau envelope of the 0/1 loss and the fixed-point tests that
characterise both operators.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from svm01.errors import InputError
from svm01.linalg import DenseVector, IndexSet
from svm01.settings import DEFAULT_TOL


class BoundaryRule(str, Enum):
    PREFER_ZERO = "prefer_zero"
    PREFER_KEEP = "prefer_keep"


class TieRule(str, Enum):
    LOWEST_INDEX = "lowest_index"


@dataclass(frozen=True)
class SparseProjection:
    projected: DenseVector
    support: IndexSet


@dataclass(frozen=True)
class HardMarginProx:
    proxed: DenseVector
    active: IndexSet


def hard_margin_count(xi: DenseVector) -> int:
    """J(xi): number of strictly positive coordinates."""
    return int(np.count_nonzero(np.asarray(xi) > 0))


# ───────────────────────────────────────────────
# 0/1 LOSS PROX
# ───────────────────────────────────────────────
def positive_hard_threshold(
    t: float,
    nu: float,
    boundary_rule: BoundaryRule = BoundaryRule.PREFER_ZERO,
) -> float:
    if nu <= 0:
        raise InputError(f"threshold must be positive, got nu={nu}")
    if t < nu:
        return min(0.0, t)
    if t > nu:
        return t
    return 0.0 if boundary_rule is BoundaryRule.PREFER_ZERO else nu


def prox_hard_margin(
    xi: DenseVector,
    beta_lambda: float,
    boundary_rule: BoundaryRule = BoundaryRule.PREFER_ZERO,
) -> HardMarginProx:
    """Coordinatewise positive hard-thresholding at nu = sqrt(2 * beta * lambda)."""
    if beta_lambda <= 0:
        raise InputError(f"beta*lambda must be positive, got {beta_lambda}")
    xi = np.asarray(xi, dtype=np.float64)
    nu = np.sqrt(2.0 * beta_lambda)

    out = np.where(xi < nu, np.minimum(xi, 0.0), xi)
    at_nu = xi == nu
    if np.any(at_nu):
        out[at_nu] = 0.0 if boundary_rule is BoundaryRule.PREFER_ZERO else nu
    return HardMarginProx(proxed=out, active=np.flatnonzero(out != 0))


def moreau_envelope_hard_margin(v: DenseVector, beta: float, lam: float) -> float:
    """
    min_q  lam * J(q) + ||q - v||^2 / (2 beta), in closed form:
    sum over v_i > 0 of min(lam, v_i^2 / (2 beta)).
    """
    if beta <= 0 or lam <= 0:
        raise InputError(f"beta and lambda must be positive, got beta={beta} lambda={lam}")
    v = np.asarray(v, dtype=np.float64)
    pos = v[v > 0]
    return float(np.sum(np.minimum(lam, pos * pos / (2.0 * beta))))


# ───────────────────────────────────────────────
# SPARSE PROJECTION
# ───────────────────────────────────────────────
def top_s_support(w: DenseVector, s: int) -> IndexSet:
    """Indices of the s largest |w_i|, ties broken toward the lowest index (sorted)."""
    n = w.shape[0]
    if s >= n:
        return np.arange(n, dtype=np.intp)

    mag = np.abs(w)
    thr = np.partition(mag, n - s)[n - s]
    above = np.flatnonzero(mag > thr)
    ties = np.flatnonzero(mag == thr)[: s - above.size]
    return np.sort(np.concatenate([above, ties]).astype(np.intp))


def project_sparse(
    w: DenseVector,
    s: int,
    tie_rule: TieRule = TieRule.LOWEST_INDEX,
) -> SparseProjection:
    if s < 1:
        raise InputError(f"sparsity level must be >= 1, got s={s}")
    if tie_rule is not TieRule.LOWEST_INDEX:
        raise InputError(f"unsupported tie rule {tie_rule}")
    w = np.asarray(w, dtype=np.float64)
    support = top_s_support(w, s)
    projected = np.zeros_like(w)
    projected[support] = w[support]
    return SparseProjection(projected=projected, support=support)


# ───────────────────────────────────────────────
# FIXED-POINT CHARACTERISATIONS
# ───────────────────────────────────────────────
def fixed_point_check_projection(
    w: DenseVector,
    q: DenseVector,
    alpha: float,
    s: int,
    tol: float = DEFAULT_TOL,
) -> bool:
    """w in Proj_S(w - alpha q): q vanishes on supp(w), |q_i| <= |w|_(s)/alpha elsewhere."""
    w = np.asarray(w, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if w.shape != q.shape:
        raise InputError(f"shape mismatch {w.shape} vs {q.shape}")
    if alpha <= 0:
        raise InputError("alpha must be positive")

    mag = np.sort(np.abs(w))[::-1]
    w_s = float(mag[s - 1]) if s <= mag.size else 0.0

    on = w != 0
    if np.any(np.abs(q[on]) > tol):
        return False
    return bool(np.all(np.abs(q[~on]) <= w_s / alpha + tol))


def fixed_point_check_prox(
    xi: DenseVector,
    v: DenseVector,
    beta: float,
    lam: float,
    tol: float = DEFAULT_TOL,
) -> bool:
    """xi in Prox_{beta lam J}(xi + beta v), coordinate by coordinate."""
    xi = np.asarray(xi, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if xi.shape != v.shape:
        raise InputError(f"shape mismatch {xi.shape} vs {v.shape}")
    if beta <= 0 or lam <= 0:
        raise InputError("beta and lambda must be positive")

    nu = np.sqrt(2.0 * beta * lam)
    upper = np.sqrt(2.0 * lam / beta)

    forbidden = (xi > tol) & (xi < nu - tol)
    if np.any(forbidden):
        return False

    kept = (xi < -tol) | (xi >= nu - tol)
    if np.any(np.abs(v[kept]) > tol):
        return False

    zero = np.abs(xi) <= tol
    vz = v[zero]
    return bool(np.all((vz >= -tol) & (vz <= upper + tol)))
