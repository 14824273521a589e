# svm01/ipal.py
"""
Inexact proximal augmented Lagrangian outer loop.

Each outer iteration warm-starts the gradient-Newton inner solver at the
current primal pair, accepts its answer once the inexactness criteria hold,
and then takes the multiplier step z <- z + rho (A w + 1 - xi).
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, Field

from svm01.errors import InputError
from svm01.linalg import DenseVector, axpy, norm2
from svm01.model import (
    PrimalDualState,
    ProblemData,
    SubproblemContext,
    VfcReport,
    build_problem,
    check_sparsity,
    constraint_residual,
    eval_G,
    lyapunov,
    metrics,
    vfc,
)
from svm01.pgn import (
    NewtonSystemCache,
    OuterCriteria,
    PgnConfig,
    PgnSteps,
    STATIONARY_STEP,
    StepKind,
    Termination,
    resolve_steps,
    solve_subproblem,
)
from svm01.settings import ZERO_TOL

logger = logging.getLogger("svm01.ipal")

DENOMINATOR_GUARD = 1e-15
LYAPUNOV_SLACK = 1e-8


# ───────────────────────────────────────────────
# CONFIG
# ───────────────────────────────────────────────
class IpalConfig(BaseModel):
    # model parameters
    lam: float = Field(default=1.0, gt=0)
    rho: float = Field(default=1.0, gt=0)
    mu: float = Field(default=0.01, gt=0)
    s: int = Field(default=20, ge=1)
    sparsify_intercept: bool = True

    # algorithmic parameters
    c1: float = Field(default=0.1, gt=0)
    c2: float = Field(default=0.1, gt=0)
    gamma: float | None = Field(default=None, gt=0)  # None: 0.1 * min row norm of A
    theta: list[float] | None = None  # None: lambda / k
    stop_tol: float = Field(default=1e-3, gt=0)
    max_outer: int = Field(default=500, ge=1)
    alpha_vfc: float | None = Field(default=None, gt=0)  # None: the inner alpha
    record_iterates: bool = False
    pgn: PgnConfig = Field(default_factory=PgnConfig)


@dataclass(frozen=True)
class DerivedParams:
    gamma_hat: float
    c3: float
    c4: float
    eta: float
    rho_floor: float
    certified: bool  # rho >= rho_floor


class OuterTermination(str, Enum):
    CONVERGED = "converged"
    INNER_STATIONARY = "inner_stationary"
    MAX_OUTER_REACHED = "max_outer_reached"


@dataclass(frozen=True)
class OuterTraceEntry:
    k: int
    vfc: VfcReport
    lyapunov: float  # M_{rho,eta}(u^k, z^k, w^{k-1})
    lyapunov_mu: float  # M_{rho,mu}(u^k, z^{k-1}, w^{k-1}), the criterion side
    m_ref: float  # M_{rho,mu}(u^{k-1}, z^{k-1}, w^{k-1})
    r1: float
    r2: float
    r3: float
    theta: float
    w_change: float
    primal_change: float
    dual_change: float
    xi_change: float
    inner_iters: int
    inner_termination: Termination
    step_kinds: str
    wall_time: float
    nnz: int
    nsv: int
    lyapunov_decrease_ok: bool | None = None
    iterate: PrimalDualState | None = None


@dataclass
class SolveReport:
    termination: OuterTermination
    outer_iters: int
    derived: DerivedParams
    steps: PgnSteps
    total_time: float
    trace: list[OuterTraceEntry] = field(default_factory=list)


TraceCallback = Callable[[OuterTraceEntry], None]


# ───────────────────────────────────────────────
# PARAMETER SETUP
# ───────────────────────────────────────────────
def problem_from(features: ArrayLike, labels: ArrayLike, cfg: IpalConfig) -> ProblemData:
    return build_problem(
        features, labels,
        lam=cfg.lam, rho=cfg.rho, mu=cfg.mu, s=cfg.s,
        sparsify_intercept=cfg.sparsify_intercept,
    )


def derive_params(P: ProblemData, cfg: IpalConfig) -> DerivedParams:
    if cfg.gamma is not None:
        gamma_hat = cfg.gamma
    else:
        gamma_hat = 0.1 * float(np.min(np.linalg.norm(P.A, axis=1))) if P.m else 0.0
    if gamma_hat <= 0:
        raise InputError("gamma is zero (A has a zero row); pass an explicit gamma")

    c3 = (2.0 * cfg.c1 + P.mu + 2.0) / gamma_hat
    c4 = (2.0 * cfg.c1 + P.mu) / gamma_hat
    eta = 4.0 * c4**2 / P.rho
    rho_floor = max(2.0 / gamma_hat**2, 8.0 * (c3**2 + c4**2) / P.mu)

    derived = DerivedParams(
        gamma_hat=gamma_hat, c3=c3, c4=c4, eta=eta, rho_floor=rho_floor, certified=P.rho >= rho_floor,
    )
    if not derived.certified:
        logger.warning(
            "[IPAL][PARAMS] rho=%.4g below rho_floor=%.4g; Lyapunov decrease is not guaranteed",
            P.rho, rho_floor,
        )
    return derived


def theta_at(cfg: IpalConfig, lam: float, k: int) -> float:
    """Inner tolerance for outer iteration k >= 1."""
    if cfg.theta:
        return cfg.theta[min(k, len(cfg.theta)) - 1]
    return lam / k


# ───────────────────────────────────────────────
# MULTIPLIER / STOPPING
# ───────────────────────────────────────────────
def multiplier_update(P: ProblemData, u: PrimalDualState, rho: float) -> DenseVector:
    return axpy(rho, constraint_residual(P, u.w, u.xi), u.z)


def relative_change(prev: PrimalDualState, curr: PrimalDualState) -> float:
    num = norm2(curr.w - prev.w) + norm2(curr.xi - prev.xi) + norm2(curr.z - prev.z)
    den = norm2(curr.w) + norm2(curr.xi) + norm2(curr.z)
    if den < DENOMINATOR_GUARD:
        return float(num)
    return float(num / den)


def stopping_check(prev: PrimalDualState, curr: PrimalDualState, tol: float) -> bool:
    if tol <= 0:
        raise InputError("tol must be positive")
    return relative_change(prev, curr) < tol


# ───────────────────────────────────────────────
# OUTER LOOP
# ───────────────────────────────────────────────
def solve(
    P: ProblemData,
    cfg: IpalConfig,
    callback: TraceCallback | None = None,
) -> tuple[PrimalDualState, SolveReport]:
    if (P.lam, P.rho, P.mu, P.s, P.sparsify_intercept) != (
        cfg.lam, cfg.rho, cfg.mu, cfg.s, cfg.sparsify_intercept
    ):
        raise InputError("model parameters of the problem and the config disagree")

    derived = derive_params(P, cfg)
    steps = resolve_steps(P, cfg.pgn, derived.gamma_hat)
    alpha_vfc = cfg.alpha_vfc if cfg.alpha_vfc is not None else steps.alpha
    cache = NewtonSystemCache()

    logger.info(
        "[IPAL][START] m=%d d=%d s=%d lambda=%.4g rho=%.4g mu=%.4g gamma=%.4g eta=%.4g certified=%s",
        P.m, P.d, P.s, P.lam, P.rho, P.mu, derived.gamma_hat, derived.eta, derived.certified,
    )

    state = PrimalDualState.zeros(P)
    prev_lyapunov = lyapunov(P, state.primal, state.z, state.w, derived.eta)
    trace: list[OuterTraceEntry] = []
    termination = OuterTermination.MAX_OUTER_REACHED
    started = time.monotonic()

    for k in range(1, cfg.max_outer + 1):
        tick = time.monotonic()
        ctx = SubproblemContext.at(P, state)
        theta = theta_at(cfg, P.lam, k)
        m_ref = eval_G(ctx, P, state.primal)
        outer = OuterCriteria(w_k=state.w, c1=cfg.c1, c2=cfg.c2, theta=theta, m_ref=m_ref)

        inner = solve_subproblem(ctx, P, steps, state.primal, outer, cache)
        u = inner.u
        z_new = multiplier_update(P, PrimalDualState(u.w, u.xi, state.z), P.rho)
        new_state = PrimalDualState(u.w, u.xi, z_new)
        elapsed = time.monotonic() - tick

        lyap = lyapunov(P, u, z_new, state.w, derived.eta)
        u_change = u.distance(state.primal)
        w_change = norm2(u.w - state.w)
        decrease_ok = None
        if k > 1 and derived.certified:
            # the certified decrease is measured on w only
            decrease_ok = prev_lyapunov - lyap >= 0.25 * P.mu * w_change**2 - LYAPUNOV_SLACK
            if not decrease_ok:
                logger.warning("[IPAL][LYAPUNOV] k=%d decrease violated: %.6e -> %.6e", k, prev_lyapunov, lyap)

        report_vfc = vfc(P, new_state, alpha_vfc)
        stats = metrics(P, new_state, ZERO_TOL)
        entry = OuterTraceEntry(
            k=k,
            vfc=report_vfc,
            lyapunov=lyap,
            lyapunov_mu=inner.G_final,
            m_ref=m_ref,
            r1=inner.residuals.r1,
            r2=inner.residuals.r2,
            r3=inner.residuals.r3,
            theta=theta,
            w_change=w_change,
            primal_change=u_change,
            dual_change=norm2(z_new - state.z),
            xi_change=norm2(u.xi - state.xi),
            inner_iters=inner.iters,
            inner_termination=inner.termination,
            step_kinds="".join(e.step_kind.value for e in inner.trace),
            wall_time=elapsed,
            nnz=stats.nnz,
            nsv=stats.nsv,
            lyapunov_decrease_ok=decrease_ok,
            iterate=new_state if cfg.record_iterates else None,
        )
        trace.append(entry)
        if callback is not None:
            callback(entry)

        logger.info(
            "[IPAL] k=%d vfc=%.3e dist_c=%.3e M=%.6e inner=%d(%s) newton=%d nnz=%d nsv=%d",
            k, report_vfc.vfc, report_vfc.dist_c, lyap, inner.iters, inner.termination.value,
            entry.step_kinds.count(StepKind.NEWTON.value), stats.nnz, stats.nsv,
        )

        check_sparsity(P, new_state.w)
        converged = stopping_check(state, new_state, cfg.stop_tol)
        state, prev_lyapunov = new_state, lyap

        if converged:
            termination = OuterTermination.CONVERGED
            break
        # stationary inner solves still take the multiplier step
        if (
            inner.termination is Termination.STATIONARY
            and w_change <= STATIONARY_STEP
            and report_vfc.dist_c <= cfg.stop_tol
        ):
            termination = OuterTermination.INNER_STATIONARY
            break

    report = SolveReport(
        termination=termination,
        outer_iters=len(trace),
        derived=derived,
        steps=steps,
        total_time=time.monotonic() - started,
        trace=trace,
    )
    logger.info(
        "[IPAL][DONE] termination=%s outer=%d time=%.3fs",
        termination.value, report.outer_iters, report.total_time,
    )
    return state, report


# ───────────────────────────────────────────────
# DIAGNOSTICS
# ───────────────────────────────────────────────
def lyapunov_rate(report: SolveReport) -> float | None:
    """
    Least-squares slope of log(M_k - M_*) over the last third of the trace,
    with M_* the final value. Negative slopes indicate linear convergence.
    """
    values = np.array([e.lyapunov for e in report.trace])
    if values.size < 4:
        return None
    gaps = values[:-1] - values[-1]
    tail = gaps[len(gaps) - max(2, len(gaps) // 3):]
    ks = np.arange(tail.size, dtype=np.float64)
    keep = tail > 0
    if np.count_nonzero(keep) < 2:
        return None
    slope, _ = np.polyfit(ks[keep], np.log(tail[keep]), 1)
    return float(slope)
