"""Discounted LQR oracle: Riccati fixed point, DP sweep, policy evaluation."""

import numpy as np
import pytest

from conftest import central_difference, random_spd
from offline_mpc.lqr_oracle import (
    DiscountedLqr,
    finite_horizon_dp,
    optimal_action_value,
    optimal_policy,
    optimal_value,
    policy_evaluation,
    solve_riccati,
)


def _random_instance(rng, n=None, m=None):
    n = n if n is not None else int(rng.integers(2, 5))
    m = m if m is not None else int(rng.integers(1, 3))
    A = rng.normal(size=(n, n))
    A *= rng.uniform(0.3, 0.95) / max(abs(np.linalg.eigvals(A)))
    B = rng.normal(size=(n, m))
    Qw = random_spd(rng, n)
    Rw = random_spd(rng, m)
    gamma = float(rng.uniform(0.8, 0.95))
    return A, B, Qw, Rw, gamma


def test_riccati_residual_is_roundoff():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A, B, Qw, Rw, gamma = _random_instance(rng)
        lqr = solve_riccati(A, B, Qw, Rw, gamma)
        scale = float(np.linalg.norm(lqr.P))
        assert lqr.riccati_residual() < 1e-9 * (1.0 + scale)


def test_riccati_matches_independent_value_iteration():
    # Oracle: the textbook discounted Riccati recursion written out in place.
    rng = np.random.default_rng(1)
    for _ in range(10):
        A, B, Qw, Rw, gamma = _random_instance(rng)
        P = np.zeros_like(Qw)
        for _ in range(4000):
            M = Rw + gamma * B.T @ P @ B
            K = gamma * np.linalg.solve(M, B.T @ P @ A)
            P = Qw + gamma * A.T @ P @ A - gamma * (B.T @ P @ A).T @ K
            P = 0.5 * (P + P.T)
        lqr = solve_riccati(A, B, Qw, Rw, gamma)
        np.testing.assert_allclose(lqr.P, P, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(lqr.K, K, rtol=1e-7, atol=1e-9)


def test_scalar_closed_form():
    # 1-D discounted Riccati reduces to a quadratic in p:
    #   p = q + g a^2 p - g^2 a^2 b^2 p^2 / (r + g b^2 p)
    a, b, q, r, gamma = 0.9, 0.5, 2.0, 0.3, 0.9
    # Rearranged: g b^2 p^2 + (r - g a^2 r - g b^2 q) p - q r = 0.
    qa = gamma * b * b
    qb = r - gamma * a * a * r - gamma * b * b * q
    qc = -q * r
    p_closed = (-qb + np.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
    lqr = solve_riccati([[a]], [[b]], [[q]], [[r]], gamma)
    assert lqr.P[0, 0] == pytest.approx(p_closed, rel=1e-10)


def test_value_and_policy_identities():
    rng = np.random.default_rng(2)
    for _ in range(10):
        A, B, Qw, Rw, gamma = _random_instance(rng)
        lqr = solve_riccati(A, B, Qw, Rw, gamma)
        for _ in range(5):
            s = rng.normal(size=A.shape[0])
            a_star = optimal_policy(lqr, s)
            # Bellman identity at the optimum: V(s) = c(s, pi(s)) + g V(s').
            s_next = A @ s + B @ a_star
            c = s @ Qw @ s + a_star @ Rw @ a_star
            assert optimal_value(lqr, s) == pytest.approx(
                c + gamma * optimal_value(lqr, s_next), rel=1e-8
            )
            # Q(s, pi(s)) = V(s).
            assert optimal_action_value(lqr, s, a_star) == pytest.approx(
                optimal_value(lqr, s), rel=1e-8
            )
            # pi(s) is a stationary point and minimizer of Q(s, .).
            grad = central_difference(
                lambda a: optimal_action_value(lqr, s, a), a_star, h=1e-5
            )
            assert np.linalg.norm(grad) < 1e-5 * (1.0 + abs(optimal_value(lqr, s)))
            for _ in range(3):
                a_other = a_star + rng.normal(size=a_star.size)
                assert (
                    optimal_action_value(lqr, s, a_other)
                    >= optimal_action_value(lqr, s, a_star) - 1e-10
                )


def test_finite_horizon_dp_converges_to_infinite_horizon():
    rng = np.random.default_rng(3)
    A, B, Qw, Rw, gamma = _random_instance(rng, n=3, m=2)
    lqr = solve_riccati(A, B, Qw, Rw, gamma)
    stages = finite_horizon_dp(A, B, Qw, Rw, gamma, N=400, terminal_P=np.zeros((3, 3)))
    P0, K0 = stages[0]
    np.testing.assert_allclose(P0, lqr.P, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(K0, lqr.K, rtol=1e-7, atol=1e-9)
    # With terminal P* every stage reproduces the stationary solution.
    stages = finite_horizon_dp(A, B, Qw, Rw, gamma, N=5, terminal_P=lqr.P)
    for P_k, K_k in stages:
        np.testing.assert_allclose(P_k, lqr.P, rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(K_k, lqr.K, rtol=1e-7, atol=1e-9)


def test_finite_horizon_dp_one_step_hand_check():
    # N=1, zero terminal: P_0 = Qw and K_0 = 0 (no future cost to shape u).
    rng = np.random.default_rng(4)
    A, B, Qw, Rw, gamma = _random_instance(rng, n=2, m=1)
    stages = finite_horizon_dp(A, B, Qw, Rw, gamma, N=1, terminal_P=np.zeros((2, 2)))
    P0, K0 = stages[0]
    np.testing.assert_allclose(P0, Qw, atol=1e-12)
    np.testing.assert_allclose(K0, np.zeros_like(K0), atol=1e-12)


def test_policy_evaluation_lyapunov_residual_and_optimality():
    rng = np.random.default_rng(5)
    for _ in range(10):
        A, B, Qw, Rw, gamma = _random_instance(rng)
        lqr = solve_riccati(A, B, Qw, Rw, gamma)
        # Evaluating the optimal gain recovers P*.
        P_star = policy_evaluation(A, B, Qw, Rw, gamma, lqr.K)
        np.testing.assert_allclose(P_star, lqr.P, rtol=1e-7, atol=1e-9)
        # A perturbed gain satisfies its own Lyapunov equation and costs more.
        K_sub = lqr.K + 0.05 * rng.normal(size=lqr.K.shape)
        P_sub = policy_evaluation(A, B, Qw, Rw, gamma, K_sub)
        Acl = A - B @ K_sub
        resid = P_sub - (Qw + K_sub.T @ Rw @ K_sub + gamma * Acl.T @ P_sub @ Acl)
        assert np.max(np.abs(resid)) < 1e-8 * (1.0 + np.linalg.norm(P_sub))
        eigs = np.linalg.eigvalsh(P_sub - lqr.P)
        assert eigs.min() > -1e-8


def test_solve_riccati_rejects_bad_gamma():
    with pytest.raises(ValueError):
        solve_riccati(np.eye(2), np.ones((2, 1)), np.eye(2), np.eye(1), 1.0)


def test_dataclass_convenience_methods():
    rng = np.random.default_rng(6)
    A, B, Qw, Rw, gamma = _random_instance(rng, n=2, m=1)
    lqr = solve_riccati(A, B, Qw, Rw, gamma)
    assert isinstance(lqr, DiscountedLqr)
    s = rng.normal(size=2)
    a = rng.normal(size=1)
    assert lqr.optimal_value(s) == optimal_value(lqr, s)
    assert lqr.optimal_action_value(s, a) == optimal_action_value(lqr, s, a)
    np.testing.assert_array_equal(lqr.optimal_policy(s), optimal_policy(lqr, s))
