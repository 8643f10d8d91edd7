import itertools

import numpy as np
import pytest

from toeplitz_ml.errors import DomainError
from toeplitz_ml.lp import LpProblem, LpStatus, solve_lp
from toeplitz_ml.matrix import make_rng


def vertex_oracle(c, A, b, u):
    """Minimum of c@x over vertices of {A x <= b, 0 <= x <= u} by enumeration."""
    n = c.size
    G = np.vstack([A, -np.eye(n), np.eye(n)])
    h = np.concatenate([b, np.zeros(n), u])
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            best = min(best, float(c @ x))
    return best


def random_instance(rng):
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 5))
    A = rng.standard_normal((m, n))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0 + rng.uniform(0.05, 1, m)
    u = rng.uniform(1, 3, n)
    return rng.standard_normal(n), A, b, u


class TestSmall:
    def test_lower_bound(self):
        sol = solve_lp(LpProblem([1.0], lb=[1.0]))
        assert sol.ok
        assert sol.x[0] == pytest.approx(1.0) and sol.objective == pytest.approx(1.0)

    def test_facet(self):
        sol = solve_lp(LpProblem([-1.0, -1.0], [[1.0, 1.0]], [1.0]))
        assert sol.objective == pytest.approx(-1.0)
        assert sol.x.sum() == pytest.approx(1.0) and np.all(sol.x >= -1e-12)

    def test_equality(self):
        sol = solve_lp(LpProblem([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[3.0]))
        np.testing.assert_allclose(sol.x, [3.0, 0.0], atol=1e-12)

    def test_free_variables(self):
        sol = solve_lp(LpProblem([1.0], [[-1.0]], [2.0], lb=[-np.inf]))
        assert sol.x[0] == pytest.approx(-2.0)

    def test_infeasible(self):
        sol = solve_lp(LpProblem([1.0], [[1.0]], [-1.0]))
        assert sol.status is LpStatus.INFEASIBLE

    def test_unbounded(self):
        sol = solve_lp(LpProblem([-1.0], [[-1.0]], [0.0]))
        assert sol.status is LpStatus.UNBOUNDED

    def test_bad_data(self):
        with pytest.raises(DomainError):
            LpProblem([1.0, 2.0], [[1.0]], [1.0])
        with pytest.raises(DomainError):
            LpProblem([1.0], lb=[2.0], ub=[1.0])


class TestOracle:
    def test_vertex_enumeration(self):
        rng = make_rng(2024)
        for _ in range(50):
            c, A, b, u = random_instance(rng)
            sol = solve_lp(LpProblem(c, A, b, ub=u))
            assert sol.ok
            assert sol.objective == pytest.approx(vertex_oracle(c, A, b, u), abs=1e-8)
            assert np.all(A @ sol.x <= b + 1e-9)
            assert np.all(sol.x >= -1e-12) and np.all(sol.x <= u + 1e-12)

    def test_larger_against_scipy(self):
        from scipy.optimize import linprog

        rng = make_rng(99)
        for _ in range(10):
            n, m = int(rng.integers(10, 60)), int(rng.integers(10, 60))
            A = rng.standard_normal((m, n))
            b = A @ rng.uniform(0, 1, n) + 0.1
            c = rng.standard_normal(n)
            sol = solve_lp(LpProblem(c, A, b, ub=np.full(n, 2.0)))
            ref = linprog(c, A, b, bounds=[(0, 2)] * n, method="highs")
            assert sol.objective == pytest.approx(ref.fun, abs=1e-8)


class TestWarmStart:
    def test_same_answer(self):
        rng = make_rng(5)
        c, A, b, u = random_instance(rng)
        cold = solve_lp(LpProblem(c, A, b, ub=u))
        warm = solve_lp(LpProblem(c, A, b + 0.01, ub=u), warm_start=cold.basis)
        ref = solve_lp(LpProblem(c, A, b + 0.01, ub=u))
        assert warm.objective == pytest.approx(ref.objective, abs=1e-10)

    def test_bad_basis_ignored(self):
        c, A, b, u = random_instance(make_rng(6))
        sol = solve_lp(LpProblem(c, A, b, ub=u), warm_start=(np.array([0]), np.zeros(1, bool)))
        assert sol.objective == pytest.approx(vertex_oracle(c, A, b, u), abs=1e-8)
