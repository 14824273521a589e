# svm01/model.py
"""
Problem data and the smooth/nonsmooth pieces of the constrained hard-margin model

    min  1/2 ||w||^2 + lambda J(xi)   s.t.  A w + 1 = xi,  ||w||_0 <= s

where the intercept is merged into w (last coordinate) and row i of A is
-y_i [x_i^T, 1].
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from svm01.errors import InfeasibleSparsity, InputError
from svm01.linalg import DenseMatrix, DenseVector, IndexSet, as_matrix, as_vector, matvec, matvec_transpose
from svm01.proxops import (
    BoundaryRule,
    SparseProjection,
    hard_margin_count,
    moreau_envelope_hard_margin,
    project_sparse,
    prox_hard_margin,
)
from svm01.settings import ZERO_TOL


# ───────────────────────────────────────────────
# TYPES
# ───────────────────────────────────────────────
@dataclass(frozen=True)
class ProblemData:
    A: DenseMatrix
    labels: DenseVector
    lam: float
    rho: float
    mu: float
    s: int
    sparsify_intercept: bool = True

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def n_features(self) -> int:
        return self.A.shape[1] - 1

    @property
    def intercept_index(self) -> int:
        return self.A.shape[1] - 1


@dataclass(frozen=True)
class PrimalPair:
    w: DenseVector
    xi: DenseVector

    def distance(self, other: "PrimalPair") -> float:
        return float(np.sqrt(np.sum((self.w - other.w) ** 2) + np.sum((self.xi - other.xi) ** 2)))


@dataclass(frozen=True)
class PrimalDualState:
    w: DenseVector
    xi: DenseVector
    z: DenseVector

    @property
    def primal(self) -> PrimalPair:
        return PrimalPair(self.w, self.xi)

    @classmethod
    def zeros(cls, P: ProblemData) -> "PrimalDualState":
        return cls(np.zeros(P.d), np.zeros(P.m), np.zeros(P.m))


@dataclass(frozen=True)
class SubproblemContext:
    anchor_w: DenseVector
    anchor_z: DenseVector
    rho: float
    mu: float
    lam: float

    @classmethod
    def at(cls, P: ProblemData, state: PrimalDualState) -> "SubproblemContext":
        return cls(anchor_w=state.w, anchor_z=state.z, rho=P.rho, mu=P.mu, lam=P.lam)


class GradG(NamedTuple):
    grad_w: DenseVector
    grad_xi: DenseVector
    z_trial: DenseVector


@dataclass(frozen=True)
class ResidualReport:
    r1: float
    r2: float
    r3: float
    T: IndexSet
    Gamma: IndexSet


@dataclass(frozen=True)
class VfcReport:
    dist_p: float
    dist_d: float
    dist_c: float

    @property
    def vfc(self) -> float:
        return max(self.dist_p, self.dist_d, self.dist_c)


@dataclass(frozen=True)
class Metrics:
    acc: float
    acc_sign: float
    nnz: int
    nsv: int


# ───────────────────────────────────────────────
# CONSTRUCTION
# ───────────────────────────────────────────────
def build_problem(
    features: ArrayLike,
    labels: ArrayLike,
    lam: float,
    rho: float,
    mu: float,
    s: int,
    sparsify_intercept: bool = True,
) -> ProblemData:
    X = as_matrix(features)
    y = as_vector(labels)
    if X.shape[1] == 0:
        raise InputError("need at least one feature")
    if y.shape[0] != X.shape[0]:
        raise InputError(f"{y.shape[0]} labels for {X.shape[0]} samples")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise InputError("labels must be +1 or -1")
    if min(lam, rho, mu) <= 0:
        raise InputError(f"lambda, rho, mu must be positive (got {lam}, {rho}, {mu})")
    d = X.shape[1] + 1
    if s < 1 or s > d:
        raise InputError(f"sparsity level s={s} outside [1, {d}]")

    A = -y[:, None] * np.hstack([X, np.ones((X.shape[0], 1))])
    return ProblemData(
        A=np.ascontiguousarray(A),
        labels=y,
        lam=float(lam),
        rho=float(rho),
        mu=float(mu),
        s=int(s),
        sparsify_intercept=sparsify_intercept,
    )


# ───────────────────────────────────────────────
# SPARSITY
# ───────────────────────────────────────────────
def sparsity_count(P: ProblemData, w: DenseVector) -> int:
    """Nonzeros that count against s (the intercept is exempt when it is not sparsified)."""
    if P.sparsify_intercept:
        return int(np.count_nonzero(w))
    return int(np.count_nonzero(w[: P.n_features]))


def check_sparsity(P: ProblemData, w: DenseVector) -> None:
    nnz = sparsity_count(P, w)
    if nnz > P.s:
        raise InfeasibleSparsity(f"||w||_0 = {nnz} exceeds s = {P.s}")


def project_primal(P: ProblemData, w: DenseVector) -> SparseProjection:
    if P.sparsify_intercept:
        return project_sparse(w, P.s)

    head = project_sparse(w[: P.n_features], P.s)
    projected = np.append(head.projected, w[P.intercept_index])
    support = np.append(head.support, P.intercept_index).astype(np.intp)
    return SparseProjection(projected=projected, support=support)


# ───────────────────────────────────────────────
# SMOOTH PART g_k
# ───────────────────────────────────────────────
def constraint_residual(P: ProblemData, w: DenseVector, xi: DenseVector) -> DenseVector:
    return matvec(P.A, w) + 1.0 - xi


def grad_g(ctx: SubproblemContext, P: ProblemData, u: PrimalPair) -> GradG:
    z_trial = ctx.anchor_z + ctx.rho * constraint_residual(P, u.w, u.xi)
    grad_w = u.w + ctx.mu * (u.w - ctx.anchor_w) + matvec_transpose(P.A, z_trial)
    return GradG(grad_w=grad_w, grad_xi=-z_trial, z_trial=z_trial)


def eval_g(ctx: SubproblemContext, P: ProblemData, u: PrimalPair) -> float:
    r = constraint_residual(P, u.w, u.xi)
    dw = u.w - ctx.anchor_w
    return float(
        0.5 * (u.w @ u.w)
        + ctx.anchor_z @ r
        + 0.5 * ctx.rho * (r @ r)
        + 0.5 * ctx.mu * (dw @ dw)
    )


def eval_G(ctx: SubproblemContext, P: ProblemData, u: PrimalPair) -> float:
    check_sparsity(P, u.w)
    return eval_g(ctx, P, u) + ctx.lam * hard_margin_count(u.xi)


def hessian_vector(P: ProblemData, mu: float, dw: DenseVector, dxi: DenseVector) -> tuple[DenseVector, DenseVector]:
    """Hessian of g (constant) applied to (dw, dxi)."""
    r = matvec(P.A, dw) - dxi
    return (1.0 + mu) * dw + P.rho * matvec_transpose(P.A, r), -P.rho * r


# ───────────────────────────────────────────────
# MERIT FUNCTIONS
# ───────────────────────────────────────────────
def augmented_lagrangian(P: ProblemData, u: PrimalPair, z: DenseVector) -> float:
    check_sparsity(P, u.w)
    r = constraint_residual(P, u.w, u.xi)
    return float(
        0.5 * (u.w @ u.w)
        + P.lam * hard_margin_count(u.xi)
        + z @ r
        + 0.5 * P.rho * (r @ r)
    )


def lyapunov(P: ProblemData, u: PrimalPair, z: DenseVector, v_anchor: DenseVector, eta: float) -> float:
    dw = u.w - v_anchor
    return augmented_lagrangian(P, u, z) + 0.5 * eta * float(dw @ dw)


# ───────────────────────────────────────────────
# INEXACTNESS RESIDUALS
# ───────────────────────────────────────────────
def residuals(
    ctx: SubproblemContext,
    P: ProblemData,
    u: PrimalPair,
    alpha: float,
    beta: float,
) -> ResidualReport:
    if alpha <= 0 or beta <= 0:
        raise InputError(f"step sizes must be positive (alpha={alpha}, beta={beta})")

    grad = grad_g(ctx, P, u)
    w_tilde = u.w - alpha * grad.grad_w
    xi_tilde = u.xi - beta * grad.grad_xi

    T = project_primal(P, w_tilde).support
    nu = np.sqrt(2.0 * beta * ctx.lam)
    # closed intervals here; the inner solver's identification uses open ones
    in_gamma = (xi_tilde <= 0) | (xi_tilde >= nu)
    Gamma = np.flatnonzero(in_gamma)

    off_T = np.ones(P.d, dtype=bool)
    off_T[T] = False
    r1 = np.sqrt(np.sum(grad.grad_w[T] ** 2) + np.sum(u.w[off_T] ** 2))
    r2 = np.sqrt(np.sum(grad.grad_xi[in_gamma] ** 2) + np.sum(u.xi[~in_gamma] ** 2))
    r3 = (
        0.5 * beta * float(grad.grad_xi @ grad.grad_xi)
        + ctx.lam * hard_margin_count(u.xi)
        - moreau_envelope_hard_margin(xi_tilde, beta, ctx.lam)
    )
    return ResidualReport(r1=float(r1), r2=float(r2), r3=float(r3), T=T, Gamma=Gamma)


# ───────────────────────────────────────────────
# OPTIMALITY DIAGNOSTICS
# ───────────────────────────────────────────────
def vfc(P: ProblemData, state: PrimalDualState, alpha: float) -> VfcReport:
    if alpha <= 0:
        raise InputError("alpha must be positive")
    w_step = state.w - alpha * (state.w + matvec_transpose(P.A, state.z))
    dist_p = np.linalg.norm(state.w - project_primal(P, w_step).projected)
    prox = prox_hard_margin(state.xi + alpha * state.z, alpha * P.lam, BoundaryRule.PREFER_ZERO)
    dist_d = np.linalg.norm(state.xi - prox.proxed)
    dist_c = np.linalg.norm(constraint_residual(P, state.w, state.xi))
    return VfcReport(dist_p=float(dist_p), dist_d=float(dist_d), dist_c=float(dist_c))


def complementarity(P: ProblemData, state: PrimalDualState) -> tuple[float, float]:
    """(max |xi_i z_i|, max |w_i (w + A^T z)_i|); both vanish at P-stationary points."""
    xz = float(np.max(np.abs(state.xi * state.z))) if P.m else 0.0
    gw = state.w + matvec_transpose(P.A, state.z)
    wg = float(np.max(np.abs(state.w * gw)))
    return xz, wg


def strict_complementarity_margin(ctx: SubproblemContext, P: ProblemData, u: PrimalPair) -> float:
    grad = grad_g(ctx, P, u)
    return float(np.min(np.abs(u.xi + grad.grad_xi))) if P.m else np.inf


# ───────────────────────────────────────────────
# PREDICTION / METRICS
# ───────────────────────────────────────────────
def decision_values(w: DenseVector, X: DenseMatrix) -> DenseVector:
    return X @ w[:-1] + w[-1]


def predict(w: DenseVector, X: DenseMatrix) -> DenseVector:
    """Signs of the decision values; a zero margin is labelled +1."""
    return np.where(decision_values(w, X) >= 0, 1.0, -1.0)


def classification_metrics(
    A: DenseMatrix,
    labels: DenseVector,
    w: DenseVector,
    zero_tol: float = ZERO_TOL,
) -> tuple[float, float, int]:
    """(hard-margin accuracy 1 - J(Aw)/m, sign accuracy, feature nnz)."""
    m = A.shape[0]
    margins = A @ w
    if m:
        acc = 1.0 - hard_margin_count(margins) / m
        correct = (margins < 0) | ((margins == 0) & (labels > 0))
        acc_sign = float(np.mean(correct))
    else:
        acc, acc_sign = 1.0, 1.0
    nnz = int(np.count_nonzero(np.abs(w[:-1]) > zero_tol))
    return float(acc), acc_sign, nnz


def metrics(P: ProblemData, state: PrimalDualState, zero_tol: float = ZERO_TOL) -> Metrics:
    if zero_tol < 0:
        raise InputError("zero_tol must be nonnegative")
    acc, acc_sign, nnz = classification_metrics(P.A, P.labels, state.w, zero_tol)
    nsv = int(np.count_nonzero(np.abs(state.z) > zero_tol))
    return Metrics(acc=acc, acc_sign=acc_sign, nnz=nnz, nsv=nsv)
