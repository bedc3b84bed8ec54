"""Analytic ground truth for discounted linear-quadratic problems.

Provides the discounted algebraic Riccati solution (infinite horizon), the
finite-horizon Riccati sweep, closed-form optimal value / action-value /
policy readouts, and policy evaluation via the discounted Lyapunov fixed
point. These are the oracles against which the trajectory optimizers and
the learned controllers are validated, and the "closed-loop optimal"
baseline for the linear task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalError

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 100_000


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _riccati_rhs(P, A, B, Qw, Rw, gamma):
    """One application of the discounted Riccati operator."""
    BtPA = B.T @ P @ A
    M = Rw + gamma * B.T @ P @ B
    try:
        X = np.linalg.solve(M, BtPA)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular input-weight block in Riccati step: {exc}")
    return _symmetrize(Qw + gamma * A.T @ P @ A - gamma**2 * BtPA.T @ X)


@dataclass(frozen=True)
class DiscountedLqr:
    """Solved discounted LQR instance: V*(s) = s'Ps, pi*(s) = -Ks."""

    A: np.ndarray
    B: np.ndarray
    Qw: np.ndarray
    Rw: np.ndarray
    gamma: float
    P: np.ndarray
    K: np.ndarray

    def riccati_residual(self) -> float:
        """Frobenius norm of P - riccati(P); ~0 for a converged solution."""
        return float(
            np.linalg.norm(
                self.P - _riccati_rhs(self.P, self.A, self.B, self.Qw, self.Rw, self.gamma)
            )
        )

    def optimal_value(self, s) -> float:
        return optimal_value(self, s)

    def optimal_action_value(self, s, a) -> float:
        return optimal_action_value(self, s, a)

    def optimal_policy(self, s) -> np.ndarray:
        return optimal_policy(self, s)


def solve_riccati(A, B, Qw, Rw, gamma: float) -> DiscountedLqr:
    """Fixed-point iteration for the discounted algebraic Riccati equation.

    Iterates P <- Qw + g A'PA - g^2 A'PB (Rw + g B'PB)^{-1} B'PA from
    P0 = Qw until successive iterates agree to RICCATI_TOL in max-norm.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Qw = np.asarray(Qw, dtype=float)
    Rw = np.asarray(Rw, dtype=float)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    P = _symmetrize(Qw.copy())
    for _ in range(RICCATI_MAX_ITER):
        P_next = _riccati_rhs(P, A, B, Qw, Rw, gamma)
        diff = float(np.max(np.abs(P_next - P)))
        P = P_next
        if diff < RICCATI_TOL:
            break
    else:
        raise NumericalError(
            f"Riccati fixed point did not converge in {RICCATI_MAX_ITER} "
            f"iterations (last residual {diff:.3e})"
        )
    # Polish to the round-off floor: downstream identities (modified-cost MPC
    # equals the optimal controller) amplify any leftover fixed-point residual.
    for _ in range(100):
        P_next = _riccati_rhs(P, A, B, Qw, Rw, gamma)
        diff_next = float(np.max(np.abs(P_next - P)))
        if diff_next >= diff:
            break
        P, diff = P_next, diff_next
    M = Rw + gamma * B.T @ P @ B
    K = gamma * np.linalg.solve(M, B.T @ P @ A)
    return DiscountedLqr(A=A, B=B, Qw=Qw, Rw=Rw, gamma=gamma, P=P, K=K)


def optimal_value(lqr: DiscountedLqr, s) -> float:
    s = np.asarray(s, dtype=float).reshape(-1)
    return float(s @ lqr.P @ s)


def optimal_action_value(lqr: DiscountedLqr, s, a) -> float:
    s = np.asarray(s, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    s_next = lqr.A @ s + lqr.B @ a
    return float(s @ lqr.Qw @ s + a @ lqr.Rw @ a + lqr.gamma * s_next @ lqr.P @ s_next)


def optimal_policy(lqr: DiscountedLqr, s) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(-1)
    return -lqr.K @ s


def finite_horizon_dp(A, B, Qw, Rw, gamma: float, N: int, terminal_P) -> list:
    """Backward Riccati sweep for the discounted N-step problem.

    Returns [(P_0, K_0), ..., (P_{N-1}, K_{N-1})] where P_k gives the
    stage-k cost-to-go x'P_k x (discount re-based at stage k) and K_k the
    stage feedback a_k = -K_k x_k. The recursion closes with P_N = terminal_P.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Qw = np.asarray(Qw, dtype=float)
    Rw = np.asarray(Rw, dtype=float)
    P = _symmetrize(np.asarray(terminal_P, dtype=float).copy())
    out = []
    for _ in range(N):
        BtPA = B.T @ P @ A
        M = Rw + gamma * B.T @ P @ B
        try:
            K = gamma * np.linalg.solve(M, BtPA)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular stage system in Riccati sweep: {exc}")
        P = _symmetrize(Qw + gamma * A.T @ P @ A - gamma * BtPA.T @ K)
        out.append((P, K))
    out.reverse()
    return out


def policy_evaluation(A, B, Qw, Rw, gamma: float, K) -> np.ndarray:
    """Discounted Lyapunov fixed point for the linear policy a = -Ks.

    Solves Ppi = (Qw + K'RwK) + g (A-BK)' Ppi (A-BK) by iteration, giving
    the closed-loop value Vpi(s) = s'Ppi s on the plant (A, B).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    Acl = A - B @ K
    Qcl = _symmetrize(np.asarray(Qw, dtype=float) + K.T @ np.asarray(Rw, dtype=float) @ K)
    P = Qcl.copy()
    for _ in range(RICCATI_MAX_ITER):
        P_next = _symmetrize(Qcl + gamma * Acl.T @ P @ Acl)
        diff = float(np.max(np.abs(P_next - P)))
        P = P_next
        if diff < RICCATI_TOL:
            return P
    raise NumericalError(
        f"Lyapunov fixed point did not converge (last residual {diff:.3e}); "
        "the discounted closed loop is likely unstable"
    )
