"""Iterative LQR with discounted stage costs and box control constraints.

The solver works on a small problem interface supplied by the mpc module:
dynamics with Jacobians, stage cost with a Gauss-Newton quadratization,
and a twice-differentiable terminal cost. Stage quantities are weighted by
gamma^k so the minimized objective is exactly

    sum_k gamma^k l(x_k, u_k) + gamma^N T(x_N).

Control bounds are enforced by clamping inside the forward rollout and by
projecting the feedforward step onto the box in the backward pass (feedback
rows of clamped components are zeroed). Regularization is Levenberg style
on the control Hessian with an adaptive damping schedule; iterations accept
only strict objective decreases, so the objective trace is monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NumericalError

DEFAULT_MAX_ITER = 200
# Cap for closed-loop callers (rollouts, data generation): warm starts keep
# the incremental solves cheap, and residual suboptimality only perturbs the
# behavior/evaluation trajectories, not the correctness checks.
CLOSED_LOOP_MAX_ITER = 100
DEFAULT_TOL = 1e-8
EXPECTED_IMPROVEMENT_TOL = 1e-10
LAMBDA_INIT = 1e-9
LAMBDA_MIN = 1e-9
LAMBDA_MAX = 1e8
LINE_SEARCH_ALPHAS = tuple(0.5**i for i in range(8))


@dataclass
class IlqrResult:
    states: np.ndarray
    actions: np.ndarray
    objective: float
    converged: bool
    iterations: int


def _rollout(problem, x0: np.ndarray, us: np.ndarray) -> tuple[np.ndarray, float]:
    """Simulate controls through the model and accumulate the objective."""
    N = us.shape[0]
    xs = np.empty((N + 1, x0.size))
    xs[0] = x0
    J = 0.0
    discount = 1.0
    for k in range(N):
        J += discount * problem.stage_cost(xs[k], us[k])
        xs[k + 1] = problem.dynamics(xs[k], us[k])
        discount *= problem.gamma
    J += discount * problem.terminal_cost(xs[N])
    if not np.isfinite(J) or not np.all(np.isfinite(xs)):
        raise NumericalError("non-finite trajectory in iLQR rollout")
    return xs, J


def _clamp(problem, us: np.ndarray) -> np.ndarray:
    if problem.bounds is None:
        return us
    lo, hi = problem.bounds
    return np.clip(us, lo, hi)


def _trajectory_derivatives(problem, xs, us):
    """Dynamics Jacobians and gamma^k-weighted stage quadratics, whole trajectory.

    Uses the problem's batched methods when available (one vectorized call
    instead of a Python call per stage); computed once per accepted
    trajectory and reused across damping retries.
    """
    N = us.shape[0]
    if hasattr(problem, "dynamics_jacobian_batch"):
        Fx_all, Fu_all = problem.dynamics_jacobian_batch(xs[:-1], us)
    else:
        pairs = [problem.dynamics_jacobian(xs[k], us[k]) for k in range(N)]
        Fx_all = np.stack([p[0] for p in pairs])
        Fu_all = np.stack([p[1] for p in pairs])
    if hasattr(problem, "stage_quadratic_batch"):
        lx, lu, lxx, luu, lxu = problem.stage_quadratic_batch(xs[:-1], us)
    else:
        quads = [problem.stage_quadratic(xs[k], us[k]) for k in range(N)]
        lx, lu, lxx, luu, lxu = (np.stack([q[i] for q in quads]) for i in range(5))
    w = problem.gamma ** np.arange(N)
    weighted = (
        lx * w[:, None],
        lu * w[:, None],
        lxx * w[:, None, None],
        luu * w[:, None, None],
        lxu * w[:, None, None],
    )
    return Fx_all, Fu_all, weighted


def _backward_pass(problem, xs, us, lam, derivs):
    """Discounted backward recursion; returns gains and expected improvement."""
    N, m = us.shape
    n = xs.shape[1]
    Fx_all, Fu_all, (lx_w, lu_w, lxx_w, luu_w, lxu_w) = derivs

    gx, gxx = problem.terminal_quadratic(xs[N])
    gammaN = problem.gamma**N
    Vx = gammaN * gx
    Vxx = gammaN * gxx

    k_ff = np.empty((N, m))
    K_fb = np.empty((N, m, n))
    expected = 0.0
    bounds = problem.bounds
    eye_m = np.eye(m)
    for k in range(N - 1, -1, -1):
        Fx = Fx_all[k]
        FuT = Fu_all[k].T
        Qx = lx_w[k] + Fx.T @ Vx
        Qu = lu_w[k] + FuT @ Vx
        VxxFx = Vxx @ Fx
        Qxx = lxx_w[k] + Fx.T @ VxxFx
        Quu = luu_w[k] + FuT @ Vxx @ Fu_all[k]
        Qux = lxu_w[k].T + FuT @ VxxFx

        if m == 1:
            h = Quu[0, 0] + lam
            if h <= 0.0:
                return None
            kk = Qu / -h
            KK = Qux / -h
        else:
            Quu_reg = 0.5 * (Quu + Quu.T) + lam * eye_m
            try:
                np.linalg.cholesky(Quu_reg)
            except np.linalg.LinAlgError:
                return None
            sol = np.linalg.solve(Quu_reg, np.column_stack([Qu[:, None], Qux]))
            kk = -sol[:, 0]
            KK = -sol[:, 1:]

        if bounds is not None:
            lo, hi = bounds
            clipped = np.clip(kk, lo - us[k], hi - us[k])
            at_bound = clipped != kk
            kk = clipped
            if np.any(at_bound):
                KK = KK.copy()
                KK[at_bound, :] = 0.0

        k_ff[k] = kk
        K_fb[k] = KK
        Quu_kk = Quu @ kk
        expected += -(kk @ Qu + 0.5 * kk @ Quu_kk)

        Vx = Qx + KK.T @ (Quu_kk + Qu) + Qux.T @ kk
        Vxx = Qxx + KK.T @ Quu @ KK + KK.T @ Qux + Qux.T @ KK
        Vxx = 0.5 * (Vxx + Vxx.T)
    return k_ff, K_fb, expected


def _forward_pass(problem, xs, us, k_ff, K_fb, alpha):
    N = us.shape[0]
    xs_new = np.empty_like(xs)
    us_new = np.empty_like(us)
    xs_new[0] = xs[0]
    J = 0.0
    discount = 1.0
    for k in range(N):
        u = us[k] + alpha * k_ff[k] + K_fb[k] @ (xs_new[k] - xs[k])
        if problem.bounds is not None:
            lo, hi = problem.bounds
            u = np.clip(u, lo, hi)
        us_new[k] = u
        J += discount * problem.stage_cost(xs_new[k], u)
        xs_new[k + 1] = problem.dynamics(xs_new[k], u)
        discount *= problem.gamma
    J += discount * problem.terminal_cost(xs_new[N])
    return xs_new, us_new, J


def solve_ilqr(
    problem,
    x0,
    u_init=None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> IlqrResult:
    """Minimize the discounted finite-horizon objective from state x0.

    `u_init` warm-starts the control sequence (closed-loop callers pass the
    previous solution shifted by one step); default is all zeros.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    N, m = problem.horizon, problem.action_dim
    if u_init is None:
        us = np.zeros((N, m))
    else:
        us = np.array(u_init, dtype=float).reshape(N, m).copy()
    us = _clamp(problem, us)

    xs, J = _rollout(problem, x0, us)
    derivs = _trajectory_derivatives(problem, xs, us)
    lam = LAMBDA_INIT
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        bp = _backward_pass(problem, xs, us, lam, derivs)
        if bp is None:
            lam = max(lam, LAMBDA_MIN) * 10.0
            if lam > LAMBDA_MAX:
                break
            continue
        k_ff, K_fb, expected = bp

        if expected <= EXPECTED_IMPROVEMENT_TOL * (1.0 + abs(J)):
            # Stationary point of the constrained problem: nothing to gain.
            converged = True
            break

        improved = False
        for alpha in LINE_SEARCH_ALPHAS:
            xs_new, us_new, J_new = _forward_pass(problem, xs, us, k_ff, K_fb, alpha)
            if np.isfinite(J_new) and J_new < J - 1e-14:
                improved = True
                break
        if improved:
            delta = J - J_new
            xs, us, J = xs_new, us_new, J_new
            derivs = _trajectory_derivatives(problem, xs, us)
            lam = max(lam * 0.5, LAMBDA_MIN)
            if delta < tol:
                converged = True
                break
        else:
            lam = max(lam, LAMBDA_MIN) * 10.0
            if lam > LAMBDA_MAX:
                break

    return IlqrResult(
        states=xs, actions=us, objective=float(J), converged=converged, iterations=iterations
    )
