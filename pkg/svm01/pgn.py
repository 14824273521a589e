# svm01/pgn.py
"""
Projected gradient-Newton inner solver for the augmented Lagrangian subproblem

    min_u  G(u) = g_k(u) + delta_S(w) + lambda J(xi).

Each iteration identifies the active sets (T, Gamma) from a prox-gradient
step, then tries a Newton step on the subspace they span and keeps it only
when it decreases G enough.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, Field

from svm01.errors import InputError
from svm01.linalg import (
    DenseVector,
    IndexSet,
    cholesky_factor,
    cholesky_solve_factored,
    dot,
    gather_submatrix,
    matvec,
    matvec_transpose,
    norm_upper_bound,
    spectral_norm_estimate,
)
from svm01.model import (
    GradG,
    PrimalPair,
    ProblemData,
    ResidualReport,
    SubproblemContext,
    eval_G,
    grad_g,
    project_primal,
    residuals,
    sparsity_count,
)

logger = logging.getLogger("svm01.pgn")

STATIONARY_STEP = 1e-12
SIGMA_FLOOR = 1e-8


# ───────────────────────────────────────────────
# CONFIG
# ───────────────────────────────────────────────
class PgnConfig(BaseModel):
    alpha: float | None = Field(default=None, gt=0)
    beta: float | None = Field(default=None, gt=0)
    sigma_g: float | None = Field(default=None, gt=0)
    max_iters: int = Field(default=500, ge=1)
    lipschitz_safety: float = Field(default=0.99, gt=0, lt=1)
    newton_path: Literal["schur", "woodbury"] = "schur"


@dataclass(frozen=True)
class PgnSteps:
    """PgnConfig with every default resolved against a concrete problem."""

    alpha: float
    beta: float
    sigma_g: float
    lipschitz: float
    zeta: float
    max_iters: int
    newton_path: str


class StepKind(str, Enum):
    GRADIENT = "G"
    NEWTON = "N"


class Termination(str, Enum):
    CRITERIA_MET = "criteria_met"
    STATIONARY = "stationary"
    MAX_ITERS = "max_iters"


class Identification(NamedTuple):
    T: IndexSet
    Gamma: IndexSet
    w_hat: DenseVector
    xi_hat: DenseVector
    grad: GradG


class NewtonResult(NamedTuple):
    u_tilde: PrimalPair
    newton_residual: float
    rhs_norm: float


@dataclass(frozen=True)
class PgnTraceEntry:
    iter: int
    step_kind: StepKind
    G_value: float
    T_size: int
    Gamma_size: int
    residuals: ResidualReport
    newton_residual: float
    half_dist: float
    newton_dist: float
    step_dist: float
    iterate: PrimalPair | None = None


@dataclass(frozen=True)
class OuterCriteria:
    """What the outer loop asks of an inner solution."""

    w_k: DenseVector
    c1: float
    c2: float
    theta: float
    m_ref: float


@dataclass
class InnerResult:
    u: PrimalPair
    termination: Termination
    iters: int
    G_initial: float
    G_final: float
    residuals: ResidualReport
    trace: list[PgnTraceEntry] = field(default_factory=list)


# ───────────────────────────────────────────────
# STEP SIZES
# ───────────────────────────────────────────────
def lipschitz_bound(P: ProblemData, mu: float) -> float:
    """
    Upper bound on the Hessian norm of g.

    The Hessian quadratic form is (1+mu)||dw||^2 + rho ||A dw - dxi||^2, so
    (1 + mu) + rho (1 + ||A||)^2 bounds it, with ||A|| taken from the safe
    side of the spectral norm estimate, sqrt(||A||_1 ||A||_inf).
    """
    a_norm = spectral_norm_estimate(P.A, iters=1).upper_bound
    return (1.0 + mu) + P.rho * (1.0 + a_norm) ** 2


def default_sigma_g(P: ProblemData, mu: float, gamma_hat: float) -> float:
    a_norm = norm_upper_bound(P.A)
    sigma = min(1.0 + mu, P.rho * gamma_hat**2 / (1.0 + a_norm**2))
    return float(np.clip(sigma, SIGMA_FLOOR, 1.0 + mu))


def resolve_steps(P: ProblemData, cfg: PgnConfig, gamma_hat: float) -> PgnSteps:
    ell = lipschitz_bound(P, P.mu)
    alpha = cfg.alpha if cfg.alpha is not None else cfg.lipschitz_safety / ell
    beta = cfg.beta if cfg.beta is not None else cfg.lipschitz_safety / ell
    if alpha >= 1.0 / ell or beta >= 1.0 / ell:
        raise InputError(f"step sizes must lie below 1/l_g = {1.0 / ell:.3e} (alpha={alpha}, beta={beta})")
    sigma = cfg.sigma_g if cfg.sigma_g is not None else default_sigma_g(P, P.mu, gamma_hat)
    zeta = min((1.0 / alpha - ell) / 2.0, (1.0 / beta - ell) / 2.0)

    logger.debug(
        "[PGN][STEPS] l_g=%.4e alpha=%.4e beta=%.4e sigma_g=%.4e zeta=%.4e",
        ell, alpha, beta, sigma, zeta,
    )
    return PgnSteps(
        alpha=alpha,
        beta=beta,
        sigma_g=sigma,
        lipschitz=ell,
        zeta=zeta,
        max_iters=cfg.max_iters,
        newton_path=cfg.newton_path,
    )


# ───────────────────────────────────────────────
# IDENTIFICATION + GRADIENT STEP
# ───────────────────────────────────────────────
def identify(
    ctx: SubproblemContext,
    P: ProblemData,
    u: PrimalPair,
    alpha: float,
    beta: float,
) -> Identification:
    grad = grad_g(ctx, P, u)
    w_hat = u.w - alpha * grad.grad_w
    xi_hat = u.xi - beta * grad.grad_xi

    T = project_primal(P, w_hat).support
    nu = np.sqrt(2.0 * ctx.lam * beta)
    Gamma = np.flatnonzero((xi_hat < 0) | (xi_hat > nu))
    return Identification(T=T, Gamma=Gamma, w_hat=w_hat, xi_hat=xi_hat, grad=grad)


def gradient_step(T: IndexSet, Gamma: IndexSet, w_hat: DenseVector, xi_hat: DenseVector) -> PrimalPair:
    w_half = np.zeros_like(w_hat)
    w_half[T] = w_hat[T]
    xi_half = np.zeros_like(xi_hat)
    xi_half[Gamma] = xi_hat[Gamma]
    return PrimalPair(w_half, xi_half)


# ───────────────────────────────────────────────
# NEWTON STEP
# ───────────────────────────────────────────────
class NewtonSystemCache:
    """
    Cholesky factors of the reduced Newton matrix keyed on (T, Gamma).
    g is quadratic, so the matrix only changes when the active sets do.
    """

    def __init__(self, maxsize: int = 16):
        self.maxsize = maxsize
        self._factors: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key, build):
        if key in self._factors:
            self.hits += 1
            self._factors.move_to_end(key)
            return self._factors[key]
        self.misses += 1
        value = build()
        self._factors[key] = value
        if len(self._factors) > self.maxsize:
            self._factors.popitem(last=False)
        return value


def _reduced_solve(
    P: ProblemData,
    mu: float,
    A_out: np.ndarray,
    rhs: DenseVector,
    key,
    cache: NewtonSystemCache | None,
    newton_path: str,
) -> DenseVector:
    """Solve ((mu+1) I + rho A_out^T A_out) d = rhs, A_out = A restricted to (not Gamma, T)."""
    c = 1.0 + mu
    if newton_path == "schur":
        def build():
            return cholesky_factor(c * np.eye(A_out.shape[1]) + P.rho * (A_out.T @ A_out))

        factor = cache.get(("schur", key), build) if cache is not None else build()
        return cholesky_solve_factored(factor, rhs)

    # Sherman-Morrison-Woodbury: factor the |not Gamma| x |not Gamma| system instead
    if A_out.shape[0] == 0:
        return rhs / c

    def build():
        return cholesky_factor(c * np.eye(A_out.shape[0]) + P.rho * (A_out @ A_out.T))

    factor = cache.get(("woodbury", key), build) if cache is not None else build()
    inner = cholesky_solve_factored(factor, matvec(A_out, rhs))
    return (rhs - P.rho * matvec_transpose(A_out, inner)) / c


def newton_step(
    ctx: SubproblemContext,
    P: ProblemData,
    u_half: PrimalPair,
    T: IndexSet,
    Gamma: IndexSet,
    cache: NewtonSystemCache | None = None,
    newton_path: str = "schur",
) -> NewtonResult:
    if T.size < 1:
        raise InputError("Newton step needs a nonempty T")

    grad = grad_g(ctx, P, u_half)
    b_w = -grad.grad_w[T]
    b_xi = -grad.grad_xi[Gamma]

    in_gamma = np.zeros(P.m, dtype=bool)
    in_gamma[Gamma] = True
    A_T = gather_submatrix(P.A, np.arange(P.m), T)
    A_in = gather_submatrix(P.A, Gamma, T)
    A_out = gather_submatrix(P.A, np.flatnonzero(~in_gamma), T)

    key = (ctx.mu, P.rho, T.tobytes(), Gamma.tobytes())
    d_w = _reduced_solve(P, ctx.mu, A_out, b_w + matvec_transpose(A_in, b_xi), key, cache, newton_path)
    d_xi = b_xi / P.rho + matvec(A_in, d_w)

    # H d - b on the reduced block
    top = (
        (1.0 + ctx.mu) * d_w
        + P.rho * matvec_transpose(A_T, matvec(A_T, d_w))
        - P.rho * matvec_transpose(A_in, d_xi)
        - b_w
    )
    bottom = -P.rho * matvec(A_in, d_w) + P.rho * d_xi - b_xi
    newton_residual = float(np.sqrt(dot(top, top) + dot(bottom, bottom)))
    rhs_norm = float(np.sqrt(dot(b_w, b_w) + dot(b_xi, b_xi)))

    w = u_half.w.copy()
    w[T] += d_w
    xi = u_half.xi.copy()
    xi[Gamma] += d_xi
    return NewtonResult(u_tilde=PrimalPair(w, xi), newton_residual=newton_residual, rhs_norm=rhs_norm)


def accept(G_half: float, G_tilde: float, dist_sq: float, sigma_g: float) -> StepKind:
    if G_half - G_tilde >= 0.25 * sigma_g * dist_sq:
        return StepKind.NEWTON
    return StepKind.GRADIENT


# ───────────────────────────────────────────────
# INNER LOOP
# ───────────────────────────────────────────────
def criteria_met(
    P: ProblemData,
    u: PrimalPair,
    G_u: float,
    res: ResidualReport,
    outer: OuterCriteria,
) -> bool:
    dw = float(np.linalg.norm(u.w - outer.w_k))
    return (
        G_u <= outer.m_ref
        and sparsity_count(P, u.w) <= P.s
        and res.r1 <= outer.c1 * dw
        and res.r2 <= outer.c2 * dw * dw
        and res.r3 <= outer.theta
    )


def solve_subproblem(
    ctx: SubproblemContext,
    P: ProblemData,
    steps: PgnSteps,
    u0: PrimalPair,
    outer: OuterCriteria,
    cache: NewtonSystemCache | None = None,
    record_iterates: bool = False,
) -> InnerResult:
    if sparsity_count(P, u0.w) > P.s:
        raise InputError("initial inner iterate violates the sparsity constraint")

    u = u0
    G_u = eval_G(ctx, P, u)
    G_initial = G_u
    res = residuals(ctx, P, u, steps.alpha, steps.beta)
    if criteria_met(P, u, G_u, res, outer):
        return InnerResult(u, Termination.CRITERIA_MET, 0, G_initial, G_u, res)

    trace: list[PgnTraceEntry] = []
    for j in range(1, steps.max_iters + 1):
        ident = identify(ctx, P, u, steps.alpha, steps.beta)
        u_half = gradient_step(ident.T, ident.Gamma, ident.w_hat, ident.xi_hat)
        G_half = eval_G(ctx, P, u_half)

        newton = newton_step(ctx, P, u_half, ident.T, ident.Gamma, cache, steps.newton_path)
        G_tilde = eval_G(ctx, P, newton.u_tilde)
        newton_dist = newton.u_tilde.distance(u_half)
        kind = accept(G_half, G_tilde, newton_dist**2, steps.sigma_g)

        if kind is StepKind.NEWTON:
            u_next, G_next = newton.u_tilde, G_tilde
        else:
            u_next, G_next, newton_dist = u_half, G_half, 0.0

        res = residuals(ctx, P, u_next, steps.alpha, steps.beta)
        step_dist = u_next.distance(u)
        trace.append(
            PgnTraceEntry(
                iter=j,
                step_kind=kind,
                G_value=G_next,
                T_size=int(ident.T.size),
                Gamma_size=int(ident.Gamma.size),
                residuals=res,
                newton_residual=newton.newton_residual,
                half_dist=u_half.distance(u),
                newton_dist=newton_dist,
                step_dist=step_dist,
                iterate=u_next if record_iterates else None,
            )
        )
        logger.debug(
            "[PGN] j=%d step=%s G=%.10e |T|=%d |Gamma|=%d r1=%.3e r2=%.3e r3=%.3e",
            j, kind.value, G_next, ident.T.size, ident.Gamma.size, res.r1, res.r2, res.r3,
        )

        if criteria_met(P, u_next, G_next, res, outer):
            return InnerResult(u_next, Termination.CRITERIA_MET, j, G_initial, G_next, res, trace)
        if step_dist <= STATIONARY_STEP:
            return InnerResult(u_next, Termination.STATIONARY, j, G_initial, G_next, res, trace)
        u, G_u = u_next, G_next

    logger.warning("[PGN] max_iters=%d reached without meeting the outer criteria", steps.max_iters)
    return InnerResult(u, Termination.MAX_ITERS, steps.max_iters, G_initial, G_u, res, trace)
