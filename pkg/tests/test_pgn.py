import math

import numpy as np
import pytest

from svm01.errors import InputError
from svm01.model import (
    PrimalPair,
    ProblemData,
    SubproblemContext,
    eval_G,
    grad_g,
    sparsity_count,
    strict_complementarity_margin,
)
from svm01.pgn import (
    NewtonSystemCache,
    OuterCriteria,
    PgnConfig,
    StepKind,
    Termination,
    accept,
    gradient_step,
    identify,
    lipschitz_bound,
    newton_step,
    resolve_steps,
    solve_subproblem,
)
from svm01.proxops import prox_hard_margin


def raw_problem(A, rho=1.0, mu=0.0, lam=1.0, s=None) -> ProblemData:
    A = np.asarray(A, dtype=np.float64)
    return ProblemData(A=A, labels=np.ones(A.shape[0]), lam=lam, rho=rho, mu=mu, s=s or A.shape[1])


def zero_context(P: ProblemData) -> SubproblemContext:
    return SubproblemContext(np.zeros(P.d), np.zeros(P.m), P.rho, P.mu, P.lam)


def full_hessian(P: ProblemData, mu: float) -> np.ndarray:
    top = np.hstack([(1.0 + mu) * np.eye(P.d) + P.rho * P.A.T @ P.A, -P.rho * P.A.T])
    bottom = np.hstack([-P.rho * P.A, P.rho * np.eye(P.m)])
    return np.vstack([top, bottom])


# ───────────────────────────────────────────────
# step sizes
# ───────────────────────────────────────────────
def test_lipschitz_bound_zero_matrix():
    assert lipschitz_bound(raw_problem(np.zeros((3, 3))), mu=0.0) == 2.0


def test_lipschitz_bound_identity_dominates_hessian():
    P = raw_problem(np.eye(3), rho=1.0, mu=1.0)
    bound = lipschitz_bound(P, mu=1.0)
    assert bound == 6.0
    assert np.max(np.linalg.eigvalsh(full_hessian(P, 1.0))) <= bound + 1e-12


def test_lipschitz_bound_grows_with_rho(make_problem):
    assert lipschitz_bound(make_problem(rho=2.0), 0.01) > lipschitz_bound(make_problem(rho=1.0), 0.01)


def test_resolve_steps_defaults(make_problem):
    P = make_problem()
    steps = resolve_steps(P, PgnConfig(), gamma_hat=0.1)
    assert steps.alpha == steps.beta == pytest.approx(0.99 / steps.lipschitz)
    assert steps.zeta > 0
    assert 1e-8 <= steps.sigma_g <= 1.0 + P.mu


def test_resolve_steps_rejects_long_steps(make_problem):
    P = make_problem()
    ell = lipschitz_bound(P, P.mu)
    with pytest.raises(InputError):
        resolve_steps(P, PgnConfig(alpha=1.0 / ell), gamma_hat=0.1)


# ───────────────────────────────────────────────
# identification / gradient step
# ───────────────────────────────────────────────
def test_identify_all_negative(make_problem):
    P = make_problem(m=6, n=3, s=2)
    ctx = zero_context(P)
    # z_trial = 1 - xi is large for very negative xi, so xi_hat stays negative
    u = PrimalPair(np.zeros(P.d), -10.0 * np.ones(P.m))
    ident = identify(ctx, P, u, 0.01, 0.01)
    assert np.all(ident.xi_hat < 0)
    np.testing.assert_array_equal(ident.Gamma, np.arange(P.m))


def test_identify_agrees_with_prox_support(make_problem, random_point):
    P = make_problem()
    for seed in range(20):
        ctx, u = random_point(P, seed)
        ident = identify(ctx, P, u, 0.05, 0.05)
        prox = prox_hard_margin(ident.xi_hat, 0.05 * P.lam)
        np.testing.assert_array_equal(ident.Gamma, prox.active)


def test_gradient_step_fixed_point(make_problem):
    P = make_problem()
    u = PrimalPair(np.zeros(P.d), np.ones(P.m))
    ident = identify(zero_context(P), P, u, 0.1, 0.1)
    half = gradient_step(ident.T, ident.Gamma, ident.w_hat, ident.xi_hat)
    np.testing.assert_array_equal(half.w, u.w)
    np.testing.assert_array_equal(half.xi, u.xi)


def test_gradient_step_scalar_hand_computation():
    # one sample, A = [[1]], rho = 1, mu = 0, lam = 1, anchors zero
    P = raw_problem([[1.0]], s=1)
    ctx = zero_context(P)
    u = PrimalPair(np.array([2.0]), np.array([0.0]))
    alpha = beta = 0.25
    ident = identify(ctx, P, u, alpha, beta)
    # z_trial = 2 + 1 - 0 = 3; grad_w = 2 + 3 = 5; grad_xi = -3
    assert ident.w_hat[0] == pytest.approx(2.0 - 0.25 * 5.0)
    assert ident.xi_hat[0] == pytest.approx(0.75)
    half = gradient_step(ident.T, ident.Gamma, ident.w_hat, ident.xi_hat)
    # nu = sqrt(0.5) < 0.75, so the slack survives
    assert half.xi[0] == pytest.approx(0.75)
    assert half.w[0] == pytest.approx(0.75)


def test_gradient_step_sufficient_decrease(make_problem, random_point):
    P = make_problem(m=50, n=100, s=10)
    steps = resolve_steps(P, PgnConfig(), gamma_hat=0.1)
    nu = math.sqrt(2.0 * steps.beta * P.lam)
    for seed in range(20):
        ctx, u = random_point(P, seed)
        ident = identify(ctx, P, u, steps.alpha, steps.beta)
        half = gradient_step(ident.T, ident.Gamma, ident.w_hat, ident.xi_hat)
        G_u, G_half = eval_G(ctx, P, u), eval_G(ctx, P, half)
        assert G_half <= G_u - steps.zeta * half.distance(u) ** 2 + 1e-10 * (1.0 + abs(G_u))
        assert sparsity_count(P, half.w) <= P.s
        assert np.all((half.xi <= 0) | (half.xi >= nu))


# ───────────────────────────────────────────────
# Newton step
# ───────────────────────────────────────────────
def dense_block_solution(ctx, P, u_half, T, Gamma):
    H = full_hessian(P, ctx.mu)
    idx = np.concatenate([T, P.d + Gamma])
    g = grad_g(ctx, P, u_half)
    b = -np.concatenate([g.grad_w, g.grad_xi])[idx]
    d = np.linalg.solve(H[np.ix_(idx, idx)], b)
    w, xi = u_half.w.copy(), u_half.xi.copy()
    w[T] += d[: T.size]
    xi[Gamma] += d[T.size:]
    return np.concatenate([w, xi])


@pytest.mark.parametrize("path", ["schur", "woodbury"])
def test_newton_matches_dense_block_solve(make_problem, random_point, rng, path):
    P = make_problem(m=30, n=20, s=6, rho=1.5, mu=0.2)
    cache = NewtonSystemCache()
    for seed in range(100):
        ctx, u = random_point(P, seed)
        T = np.sort(rng.choice(P.d, size=P.s, replace=False)).astype(np.intp)
        Gamma = np.sort(rng.choice(P.m, size=int(rng.integers(0, P.m + 1)), replace=False)).astype(np.intp)
        out = newton_step(ctx, P, u, T, Gamma, cache, path)
        expected = dense_block_solution(ctx, P, u, T, Gamma)
        got = np.concatenate([out.u_tilde.w, out.u_tilde.xi])
        assert np.linalg.norm(got - expected) <= 1e-8 * max(1.0, np.linalg.norm(expected))
        assert out.newton_residual <= 1e-8 * (1.0 + out.rhs_norm)


def test_newton_lands_on_subspace_minimiser(make_problem, random_point):
    P = make_problem(m=30, n=20, s=6)
    ctx, u = random_point(P, 1)
    ident = identify(ctx, P, u, 0.01, 0.01)
    half = gradient_step(ident.T, ident.Gamma, ident.w_hat, ident.xi_hat)
    out = newton_step(ctx, P, half, ident.T, ident.Gamma)
    g = grad_g(ctx, P, out.u_tilde)
    reduced = np.concatenate([g.grad_w[ident.T], g.grad_xi[ident.Gamma]])
    assert np.linalg.norm(reduced) <= 1e-8 * (1.0 + out.rhs_norm)

    again = newton_step(ctx, P, out.u_tilde, ident.T, ident.Gamma)
    assert again.u_tilde.distance(out.u_tilde) <= 1e-8


def test_newton_cache_reuses_factors(make_problem, random_point):
    P = make_problem()
    ctx, u = random_point(P)
    T = np.arange(P.s, dtype=np.intp)
    Gamma = np.arange(5, dtype=np.intp)
    cache = NewtonSystemCache()
    newton_step(ctx, P, u, T, Gamma, cache)
    newton_step(ctx, P, u, T, Gamma, cache)
    assert (cache.hits, cache.misses) == (1, 1)


def test_newton_rejects_empty_T(make_problem, random_point):
    P = make_problem()
    ctx, u = random_point(P)
    with pytest.raises(InputError):
        newton_step(ctx, P, u, np.array([], dtype=np.intp), np.arange(3, dtype=np.intp))


# ───────────────────────────────────────────────
# acceptance
# ───────────────────────────────────────────────
def test_accept_rejects_no_decrease():
    assert accept(1.0, 1.0, 0.5, 0.1) is StepKind.GRADIENT


def test_accept_takes_large_decrease():
    assert accept(2.0, 2.0 - 0.1 * 0.5, 0.5, 0.1) is StepKind.NEWTON


def test_accept_boundary_equality():
    assert accept(2.0, 1.0, 4.0, 1.0) is StepKind.NEWTON


# ───────────────────────────────────────────────
# inner loop
# ───────────────────────────────────────────────
def test_solve_subproblem_returns_immediately_when_criteria_hold(make_problem):
    P = make_problem()
    ctx = zero_context(P)
    u0 = PrimalPair(np.zeros(P.d), np.ones(P.m))
    steps = resolve_steps(P, PgnConfig(alpha=1e-4, beta=1e-4), gamma_hat=0.1)
    outer = OuterCriteria(w_k=np.zeros(P.d), c1=0.1, c2=0.1, theta=1.0, m_ref=eval_G(ctx, P, u0))
    result = solve_subproblem(ctx, P, steps, u0, outer)
    assert result.termination is Termination.CRITERIA_MET
    assert result.iters == 0
    assert result.trace == []


def test_solve_subproblem_rejects_infeasible_start(make_problem):
    P = make_problem(s=2)
    steps = resolve_steps(P, PgnConfig(), gamma_hat=0.1)
    outer = OuterCriteria(w_k=np.zeros(P.d), c1=0.1, c2=0.1, theta=1.0, m_ref=0.0)
    with pytest.raises(InputError):
        solve_subproblem(zero_context(P), P, steps, PrimalPair(np.ones(P.d), np.zeros(P.m)), outer)


@pytest.mark.parametrize("seed", range(20))
def test_inner_sufficient_decrease_and_convergence(make_problem, seed):
    P = make_problem(seed=seed, m=50, n=100, s=10)
    ctx = zero_context(P)
    steps = resolve_steps(P, PgnConfig(max_iters=500), gamma_hat=0.1)
    u0 = PrimalPair(np.zeros(P.d), np.zeros(P.m))
    # unreachable theta keeps the solver running until it stalls
    outer = OuterCriteria(w_k=np.zeros(P.d), c1=0.1, c2=0.1, theta=-1.0, m_ref=np.inf)
    result = solve_subproblem(ctx, P, steps, u0, outer, NewtonSystemCache())

    previous = result.G_initial
    for entry in result.trace:
        required = steps.zeta * entry.half_dist**2 + 0.25 * steps.sigma_g * entry.newton_dist**2
        assert previous - entry.G_value >= required - 1e-10 * (1.0 + abs(previous))
        previous = entry.G_value

    assert result.termination is Termination.STATIONARY
    assert sparsity_count(P, result.u.w) <= P.s
    assert result.trace[-1].step_dist <= 1e-12


def test_quadratic_rate_after_consecutive_newton_steps(make_problem):
    floor = 1e-10
    verified = 0
    for seed in range(20):
        P = make_problem(seed=seed, m=50, n=100, s=10)
        ctx = zero_context(P)
        steps = resolve_steps(P, PgnConfig(max_iters=500), gamma_hat=0.1)
        u0 = PrimalPair(np.zeros(P.d), np.zeros(P.m))
        outer = OuterCriteria(w_k=np.zeros(P.d), c1=0.1, c2=0.1, theta=-1.0, m_ref=np.inf)
        result = solve_subproblem(ctx, P, steps, u0, outer, record_iterates=True)
        if strict_complementarity_margin(ctx, P, result.u) < 1e-3:
            continue

        # final run of accepted Newton steps; checked from its second step on
        kinds = [e.step_kind for e in result.trace]
        tail = len(kinds) - next((j for j, k in enumerate(reversed(kinds)) if k is not StepKind.NEWTON), len(kinds))
        if len(kinds) - tail < 2:
            continue
        start = tail + 1
        verified += 1
        dist = [e.iterate.distance(result.u) for e in result.trace]
        for before, after in zip(dist[start:], dist[start + 1:]):
            assert after <= max(10.0 * before**2, floor)

    assert verified > 0
