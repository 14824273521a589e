import numpy as np
import pytest

from svm01.model import PrimalPair, ProblemData, SubproblemContext, build_problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def make_problem():
    """Random Gaussian problem; rows of A are -y_i [x_i, 1]."""

    def _make(seed=0, m=30, n=20, s=8, lam=1.0, rho=1.0, mu=0.01, sparsify_intercept=True) -> ProblemData:
        r = np.random.default_rng(seed)
        X = r.standard_normal((m, n))
        y = np.where(r.random(m) < 0.5, 1.0, -1.0)
        return build_problem(X, y, lam, rho, mu, s, sparsify_intercept)

    return _make


@pytest.fixture
def random_point():
    """A random s-sparse primal pair plus a random subproblem context for P."""

    def _make(P: ProblemData, seed=0) -> tuple[SubproblemContext, PrimalPair]:
        r = np.random.default_rng(seed)
        w = np.zeros(P.d)
        w[r.choice(P.d, size=P.s, replace=False)] = r.standard_normal(P.s)
        xi = r.standard_normal(P.m)
        ctx = SubproblemContext(
            anchor_w=r.standard_normal(P.d),
            anchor_z=r.standard_normal(P.m),
            rho=P.rho,
            mu=P.mu,
            lam=P.lam,
        )
        return ctx, PrimalPair(w, xi)

    return _make


@pytest.fixture
def separable_xy():
    X = np.array([[2.0, 1.0], [1.5, -0.5], [-2.0, 0.5], [-1.0, -1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    return X, y
