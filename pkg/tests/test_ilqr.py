"""iLQR solver against dynamic-programming, brute-force, and stationarity oracles."""

import numpy as np
import pytest

from conftest import central_difference
from offline_mpc.ilqr import solve_ilqr
from offline_mpc.lqr_oracle import finite_horizon_dp


class LqProblem:
    """Minimal problem-protocol implementation (scalar methods only)."""

    def __init__(self, A, B, Qw, Rw, gamma, N, bounds=None):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.Qw = np.asarray(Qw, dtype=float)
        self.Rw = np.asarray(Rw, dtype=float)
        self.gamma = float(gamma)
        self.horizon = int(N)
        self.action_dim = self.B.shape[1]
        self.bounds = bounds

    def dynamics(self, x, u):
        return self.A @ x + self.B @ u

    def dynamics_jacobian(self, x, u):
        return self.A.copy(), self.B.copy()

    def stage_cost(self, x, u):
        return float(x @ self.Qw @ x + u @ self.Rw @ u)

    def stage_quadratic(self, x, u):
        return (
            2.0 * self.Qw @ x,
            2.0 * self.Rw @ u,
            2.0 * self.Qw,
            2.0 * self.Rw,
            np.zeros((self.Qw.shape[0], self.Rw.shape[0])),
        )

    def terminal_cost(self, x):
        return 0.0

    def terminal_quadratic(self, x):
        n = self.A.shape[0]
        return np.zeros(n), np.zeros((n, n))


class SmoothNonQuadraticProblem:
    """Scalar problem with a cosine stage cost (smooth, non-quadratic)."""

    gamma = 0.95
    horizon = 25
    action_dim = 1
    bounds = None

    def dynamics(self, x, u):
        return np.array([x[0] + 0.2 * u[0]])

    def dynamics_jacobian(self, x, u):
        return np.array([[1.0]]), np.array([[0.2]])

    def stage_cost(self, x, u):
        return float(1.0 - np.cos(x[0]) + 0.1 * u[0] ** 2)

    def stage_quadratic(self, x, u):
        return (
            np.array([np.sin(x[0])]),
            np.array([0.2 * u[0]]),
            np.array([[max(np.cos(x[0]), 0.05)]]),  # Gauss-Newton style floor
            np.array([[0.2]]),
            np.zeros((1, 1)),
        )

    def terminal_cost(self, x):
        return float(1.0 - np.cos(x[0]))

    def terminal_quadratic(self, x):
        return np.array([np.sin(x[0])]), np.array([[max(np.cos(x[0]), 0.05)]])


def _objective(problem, x0, us):
    x = np.asarray(x0, dtype=float)
    J, disc = 0.0, 1.0
    for u in us:
        J += disc * problem.stage_cost(x, u)
        x = problem.dynamics(x, u)
        disc *= problem.gamma
    return J + disc * problem.terminal_cost(x)


def test_lq_problem_matches_riccati_dp():
    rng = np.random.default_rng(0)
    for _ in range(5):
        n, m = 3, 2
        A = rng.normal(size=(n, n))
        A *= 0.95 / max(abs(np.linalg.eigvals(A)))
        B = rng.normal(size=(n, m))
        M = rng.normal(size=(n, n))
        Qw = M.T @ M + 0.1 * np.eye(n)
        Mr = rng.normal(size=(m, m))
        Rw = Mr.T @ Mr + 0.1 * np.eye(m)
        gamma, N = 0.9, 15
        problem = LqProblem(A, B, Qw, Rw, gamma, N)
        x0 = rng.normal(size=n)

        stages = finite_horizon_dp(A, B, Qw, Rw, gamma, N, np.zeros((n, n)))
        x = x0.copy()
        us_dp = []
        for _, K in stages:
            u = -K @ x
            us_dp.append(u)
            x = A @ x + B @ u
        us_dp = np.array(us_dp)

        result = solve_ilqr(problem, x0, max_iter=300)
        assert result.converged
        np.testing.assert_allclose(result.actions, us_dp, rtol=1e-6, atol=1e-8)
        assert result.objective == pytest.approx(_objective(problem, x0, us_dp), rel=1e-9)


def test_one_step_scalar_quadratic_analytic():
    # N=1: J(u) = x^2 + r u^2 + g (x + b u)^2; u* = -g b x / (r + g b^2).
    b, r, gamma, x0 = 0.7, 0.4, 0.9, np.array([2.0])

    class OneStep(LqProblem):
        def terminal_cost(self, x):
            return float(x @ x)

        def terminal_quadratic(self, x):
            return 2.0 * x, 2.0 * np.eye(1)

    problem = OneStep([[1.0]], [[b]], [[1.0]], [[r]], gamma, 1)
    result = solve_ilqr(problem, x0)
    u_star = -gamma * b * x0[0] / (r + gamma * b * b)
    assert result.converged
    assert result.actions[0, 0] == pytest.approx(u_star, rel=1e-9)


def test_box_bounds_against_brute_force():
    # Two-step scalar problem, grid search over the feasible control square.
    bound = 0.3
    problem = LqProblem(
        [[1.0]], [[1.0]], [[1.0]], [[1.0]], 0.9, 2,
        bounds=(np.array([-bound]), np.array([bound])),
    )
    x0 = np.array([2.0])
    grid = np.linspace(-bound, bound, 1201)
    U0, U1 = np.meshgrid(grid, grid, indexing="ij")
    X1 = x0[0] + U0
    X2 = X1 + U1
    J = (x0[0] ** 2 + U0**2) + 0.9 * (X1**2 + U1**2)  # terminal cost is zero
    best = np.unravel_index(np.argmin(J), J.shape)
    result = solve_ilqr(problem, x0)
    assert abs(result.actions[0, 0] - grid[best[0]]) < 1e-3
    assert abs(result.actions[1, 0] - grid[best[1]]) < 1e-3
    assert result.objective <= J[best] + 1e-9
    # The first control saturates at the box edge.
    assert result.actions[0, 0] == pytest.approx(-bound)


def test_bounds_respected_everywhere():
    bound = 0.15
    problem = LqProblem(
        [[1.0, 0.1], [0.0, 1.0]], [[0.0], [0.1]], np.eye(2), [[0.01]], 0.9, 30,
        bounds=(np.array([-bound]), np.array([bound])),
    )
    result = solve_ilqr(problem, np.array([1.5, 0.0]))
    assert np.all(result.actions >= -bound - 1e-12)
    assert np.all(result.actions <= bound + 1e-12)


def test_non_quadratic_stationarity():
    problem = SmoothNonQuadraticProblem()
    x0 = np.array([1.2])
    result = solve_ilqr(problem, x0, max_iter=500)
    assert result.converged
    flat = result.actions.reshape(-1)
    grad = central_difference(
        lambda us: _objective(problem, x0, us.reshape(-1, 1)), flat, h=1e-6
    )
    assert np.max(np.abs(grad)) < 1e-5


def test_warm_start_converges_immediately():
    problem = SmoothNonQuadraticProblem()
    x0 = np.array([1.2])
    cold = solve_ilqr(problem, x0, max_iter=500)
    warm = solve_ilqr(problem, x0, u_init=cold.actions, max_iter=500)
    assert warm.converged
    assert warm.iterations <= 2
    assert warm.objective <= cold.objective + 1e-12


def test_objective_never_worse_than_initialization():
    rng = np.random.default_rng(1)
    problem = LqProblem(
        rng.normal(size=(2, 2)) * 0.4, rng.normal(size=(2, 1)),
        np.eye(2), np.eye(1), 0.9, 10,
    )
    x0 = rng.normal(size=2)
    u0 = rng.normal(size=(10, 1))
    result = solve_ilqr(problem, x0, u_init=u0)
    assert result.objective <= _objective(problem, x0, u0) + 1e-12


def test_determinism():
    problem = SmoothNonQuadraticProblem()
    r1 = solve_ilqr(problem, np.array([0.9]))
    r2 = solve_ilqr(problem, np.array([0.9]))
    np.testing.assert_array_equal(r1.actions, r2.actions)
    assert r1.objective == r2.objective
    assert r1.iterations == r2.iterations
