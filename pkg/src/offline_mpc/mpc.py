"""Parameterized MPC schemes with trainable quadratic stage costs.

A scheme bundles a prediction model, a stage cost, a terminal cost, a
discount factor, and a horizon. Two solver backends sit behind `solve`:

* unconstrained linear models with quadratic costs are solved exactly by a
  discounted affine-quadratic dynamic-programming sweep (handles linear and
  state-action cross terms in the cost);
* everything else runs through the discounted iLQR in `ilqr`.

Stage costs come in two shapes. `QuadraticStageCost` is the trainable
tracking form (z - s_ref)^T W (z - s_ref) + a^T R a + theta3 with W and R
parameterized through lower-triangular factors so any parameter vector
yields positive-semidefinite weights; z is the plant state or its
observation depending on the scheme's cost space. `GeneralQuadraticCost`
is a fixed full quadratic with cross terms, used for value-equivalent
stage-cost constructions on linear systems.

Schemes are immutable; `solve` allocates all scratch per call, so a single
scheme instance can serve concurrent rollouts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .core import NumericalError
from .envs import CartpolePlant, LinearPlant, PendulumPlant
from .ilqr import solve_ilqr
from .lqr_oracle import DiscountedLqr, solve_riccati

DYNAMICS_CONSISTENCY_TOL = 1e-9
TERMINAL_SMOOTHING = 1e-8


def _readonly(values, shape=None) -> np.ndarray:
    a = np.array(values, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    if not np.all(np.isfinite(a)):
        raise ValueError("array contains non-finite entries")
    a.flags.writeable = False
    return a


def _pack_tril(C: np.ndarray) -> np.ndarray:
    return C[np.tril_indices(C.shape[0])].copy()


def _unpack_tril(values: np.ndarray, dim: int) -> np.ndarray:
    C = np.zeros((dim, dim))
    C[np.tril_indices(dim)] = values
    return C


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Deterministic linear prediction model s+ = A s + B a."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _readonly(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        B = _readonly(self.B, (A.shape[0], -1))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def action_dim(self) -> int:
        return self.B.shape[1]

    @property
    def obs_dim(self) -> int:
        return self.A.shape[0]

    u_bound = None

    @classmethod
    def from_plant(cls, plant: LinearPlant) -> "LinearModel":
        return cls(A=plant.A, B=plant.B)

    def step(self, state, action) -> np.ndarray:
        s = np.asarray(state, dtype=float).reshape(-1)
        a = np.asarray(action, dtype=float).reshape(-1)
        return self.A @ s + self.B @ a

    def step_raw(self, state, action) -> np.ndarray:
        return self.step(state, action)

    def step_raw_batch(self, states, actions) -> np.ndarray:
        S = np.asarray(states, dtype=float)
        U = np.asarray(actions, dtype=float)
        return S @ self.A.T + U @ self.B.T

    def step_jacobian(self, state, action):
        return self.A.copy(), self.B.copy()

    def step_jacobian_batch(self, states, actions):
        K = np.asarray(states).shape[0]
        return (
            np.broadcast_to(self.A, (K, *self.A.shape)),
            np.broadcast_to(self.B, (K, *self.B.shape)),
        )

    def observe(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float).reshape(-1).copy()

    def observe_batch(self, states) -> np.ndarray:
        return np.asarray(states, dtype=float).copy()

    def observe_jacobian(self, state) -> np.ndarray:
        return np.eye(self.state_dim)

    def observe_jacobian_batch(self, states) -> np.ndarray:
        K = np.asarray(states).shape[0]
        n = self.state_dim
        return np.broadcast_to(np.eye(n), (K, n, n))

    def model_params(self) -> np.ndarray:
        """Flattened (A, B) entries, the trainable model parameter vector."""
        return np.concatenate([self.A.ravel(), self.B.ravel()])

    def with_model_params(self, params) -> "LinearModel":
        p = np.asarray(params, dtype=float).reshape(-1)
        n, m = self.state_dim, self.action_dim
        if p.size != n * n + n * m:
            raise ValueError(f"expected {n * n + n * m} model parameters, got {p.size}")
        return LinearModel(A=p[: n * n].reshape(n, n), B=p[n * n :].reshape(n, m))


@dataclass(frozen=True, eq=False)
class QuadraticStageCost:
    """Tracking stage cost (z - s_ref)^T W (z - s_ref) + a^T R a + theta3.

    W = C_W C_W^T and R = C_R C_R^T with lower-triangular C_W, C_R, so every
    parameter vector yields positive-semidefinite weights. The trainable
    parameter vector is the packed lower triangle of C_W, then of C_R, then
    theta3; s_ref is a fixed tracking target in the cost space.
    """

    C_W: np.ndarray
    C_R: np.ndarray
    theta3: float
    s_ref: np.ndarray

    def __post_init__(self):
        C_W = _readonly(self.C_W)
        C_R = _readonly(self.C_R)
        for name, C in (("C_W", C_W), ("C_R", C_R)):
            if C.ndim != 2 or C.shape[0] != C.shape[1]:
                raise ValueError(f"{name} must be square, got shape {C.shape}")
            if not np.array_equal(C, np.tril(C)):
                raise ValueError(f"{name} must be lower triangular")
        s_ref = _readonly(self.s_ref, (C_W.shape[0],))
        object.__setattr__(self, "C_W", C_W)
        object.__setattr__(self, "C_R", C_R)
        object.__setattr__(self, "theta3", float(self.theta3))
        object.__setattr__(self, "s_ref", s_ref)

    def __eq__(self, other):
        if not isinstance(other, QuadraticStageCost):
            return NotImplemented
        return (
            np.array_equal(self.C_W, other.C_W)
            and np.array_equal(self.C_R, other.C_R)
            and self.theta3 == other.theta3
            and np.array_equal(self.s_ref, other.s_ref)
        )

    @property
    def tracked_dim(self) -> int:
        return self.C_W.shape[0]

    @property
    def action_dim(self) -> int:
        return self.C_R.shape[0]

    @property
    def W(self) -> np.ndarray:
        return self.C_W @ self.C_W.T

    @property
    def R(self) -> np.ndarray:
        return self.C_R @ self.C_R.T

    @property
    def num_params(self) -> int:
        p, m = self.tracked_dim, self.action_dim
        return p * (p + 1) // 2 + m * (m + 1) // 2 + 1

    def evaluate(self, z, action) -> float:
        d = np.asarray(z, dtype=float).reshape(-1) - self.s_ref
        a = np.asarray(action, dtype=float).reshape(-1)
        return float(d @ self.W @ d + a @ self.R @ a + self.theta3)

    def get_params(self) -> np.ndarray:
        return np.concatenate([_pack_tril(self.C_W), _pack_tril(self.C_R), [self.theta3]])

    def with_params(self, params) -> "QuadraticStageCost":
        theta = np.asarray(params, dtype=float).reshape(-1)
        if theta.size != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {theta.size}")
        p, m = self.tracked_dim, self.action_dim
        n_w = p * (p + 1) // 2
        n_r = m * (m + 1) // 2
        return QuadraticStageCost(
            C_W=_unpack_tril(theta[:n_w], p),
            C_R=_unpack_tril(theta[n_w : n_w + n_r], m),
            theta3=float(theta[-1]),
            s_ref=self.s_ref,
        )

    def grad_params(self, z, action) -> np.ndarray:
        """Gradient of the cost value w.r.t. the packed parameter vector."""
        d = np.asarray(z, dtype=float).reshape(-1) - self.s_ref
        a = np.asarray(action, dtype=float).reshape(-1)
        gW = 2.0 * np.outer(d, d) @ self.C_W
        gR = 2.0 * np.outer(a, a) @ self.C_R
        return np.concatenate([_pack_tril(gW), _pack_tril(gR), [1.0]])


@dataclass(frozen=True, eq=False)
class GeneralQuadraticCost:
    """Full quadratic stage cost with state-action cross terms.

    l(s, a) = s^T Qxx s + a^T Quu a + 2 s^T Qxu a + 2 qx.s + 2 qu.a + q0,
    evaluated directly on plant states (no observation map).
    """

    Qxx: np.ndarray
    Quu: np.ndarray
    Qxu: np.ndarray
    qx: np.ndarray
    qu: np.ndarray
    q0: float

    def __post_init__(self):
        Qxx = np.array(self.Qxx, dtype=float)
        Quu = np.array(self.Quu, dtype=float)
        n, m = Qxx.shape[0], Quu.shape[0]
        object.__setattr__(self, "Qxx", _readonly(0.5 * (Qxx + Qxx.T)))
        object.__setattr__(self, "Quu", _readonly(0.5 * (Quu + Quu.T)))
        object.__setattr__(self, "Qxu", _readonly(self.Qxu, (n, m)))
        object.__setattr__(self, "qx", _readonly(self.qx, (n,)))
        object.__setattr__(self, "qu", _readonly(self.qu, (m,)))
        object.__setattr__(self, "q0", float(self.q0))

    def __eq__(self, other):
        if not isinstance(other, GeneralQuadraticCost):
            return NotImplemented
        return (
            np.array_equal(self.Qxx, other.Qxx)
            and np.array_equal(self.Quu, other.Quu)
            and np.array_equal(self.Qxu, other.Qxu)
            and np.array_equal(self.qx, other.qx)
            and np.array_equal(self.qu, other.qu)
            and self.q0 == other.q0
        )

    @property
    def state_dim(self) -> int:
        return self.Qxx.shape[0]

    @property
    def action_dim(self) -> int:
        return self.Quu.shape[0]

    def evaluate(self, state, action) -> float:
        s = np.asarray(state, dtype=float).reshape(-1)
        a = np.asarray(action, dtype=float).reshape(-1)
        return float(
            s @ self.Qxx @ s
            + a @ self.Quu @ a
            + 2.0 * s @ self.Qxu @ a
            + 2.0 * self.qx @ s
            + 2.0 * self.qu @ a
            + self.q0
        )


@dataclass(frozen=True)
class ZeroTerminalCost:
    """No terminal penalty."""

    def evaluate(self, z) -> float:
        return 0.0


@dataclass(frozen=True, eq=False)
class QuadraticTerminalCost:
    """Terminal penalty x^T P x + 2 p.x + c over plant states."""

    P: np.ndarray
    p: np.ndarray = None
    c: float = 0.0

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"P must be square, got shape {P.shape}")
        p = np.zeros(P.shape[0]) if self.p is None else self.p
        object.__setattr__(self, "P", _readonly(0.5 * (P + P.T)))
        object.__setattr__(self, "p", _readonly(p, (P.shape[0],)))
        object.__setattr__(self, "c", float(self.c))

    def __eq__(self, other):
        if not isinstance(other, QuadraticTerminalCost):
            return NotImplemented
        return (
            np.array_equal(self.P, other.P)
            and np.array_equal(self.p, other.p)
            and self.c == other.c
        )

    def evaluate(self, state) -> float:
        x = np.asarray(state, dtype=float).reshape(-1)
        return float(x @ self.P @ x + 2.0 * self.p @ x + self.c)

    def quadratic(self, state):
        x = np.asarray(state, dtype=float).reshape(-1)
        return 2.0 * (self.P @ x + self.p), 2.0 * self.P


@dataclass(frozen=True, eq=False)
class SmoothedNormTerminalCost:
    """Smoothed tracking-error norm sqrt(||z - ref||^2 + smoothing).

    Evaluated in the scheme's cost space; the smoothing keeps the cost twice
    differentiable at the target so the trajectory optimizer can use it.
    """

    ref: np.ndarray
    smoothing: float = TERMINAL_SMOOTHING

    def __post_init__(self):
        object.__setattr__(self, "ref", _readonly(self.ref, (-1,)))
        smoothing = float(self.smoothing)
        if smoothing <= 0.0:
            raise ValueError("smoothing must be positive")
        object.__setattr__(self, "smoothing", smoothing)

    def __eq__(self, other):
        if not isinstance(other, SmoothedNormTerminalCost):
            return NotImplemented
        return np.array_equal(self.ref, other.ref) and self.smoothing == other.smoothing

    def evaluate(self, z) -> float:
        d = np.asarray(z, dtype=float).reshape(-1) - self.ref
        return float(np.sqrt(d @ d + self.smoothing))

    def quadratic(self, z):
        d = np.asarray(z, dtype=float).reshape(-1) - self.ref
        t = np.sqrt(d @ d + self.smoothing)
        grad = d / t
        hess = (np.eye(d.size) - np.outer(d, d) / t**2) / t
        return grad, hess


@dataclass(frozen=True)
class MpcSolution:
    """Open-loop optimum from one solve; states[0] is the query state."""

    states: np.ndarray
    actions: np.ndarray
    objective: float
    converged: bool
    iterations: int


def _affine_riccati_sweep(A, B, Qxx, Quu, Qxu, qx, qu, q0, gamma, N, P_T, p_T, c_T):
    """Backward dynamic programming for the discounted affine-quadratic problem.

    The stage value ahead of step k is x^T P x + 2 p.x + c; returns per-stage
    feedback gains and feedforward offsets (u_k = -K_k x_k - k_k), index 0
    first. Raises if a stage control Hessian is not positive definite.
    """
    P, p = P_T, p_T
    Ks, ks = [], []
    for _ in range(N):
        H = Quu + gamma * B.T @ P @ B
        G = Qxu.T + gamma * B.T @ P @ A
        h = qu + gamma * B.T @ p
        try:
            chol = np.linalg.cholesky(0.5 * (H + H.T))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("stage control Hessian is not positive definite") from exc
        K = np.linalg.solve(chol.T, np.linalg.solve(chol, G))
        kff = np.linalg.solve(chol.T, np.linalg.solve(chol, h))
        P_new = Qxx + gamma * A.T @ P @ A - G.T @ K
        p = qx + gamma * A.T @ p - G.T @ kff
        P = 0.5 * (P_new + P_new.T)
        Ks.append(K)
        ks.append(kff)
    Ks.reverse()
    ks.reverse()
    return Ks, ks


class _IlqrProblem:
    """Adapter handing the scheme's costs and model to the iLQR solver."""

    def __init__(self, mpc: "ParameterizedMpc"):
        model = mpc.model
        self.horizon = mpc.N
        self.gamma = mpc.gamma
        self.action_dim = model.action_dim
        self.bounds = mpc.input_bounds
        self._model = model
        self._mpc = mpc
        self._identity_space = mpc.cost_space == "state"
        n, m = model.state_dim, model.action_dim
        self._lxu_zero = np.zeros((n, m))
        self._lxu_zero.flags.writeable = False

        sc = mpc.stage_cost
        self._general = isinstance(sc, GeneralQuadraticCost)
        if not self._general:
            self._W2 = 2.0 * sc.W
            self._R2 = 2.0 * sc.R
            self._s_ref = sc.s_ref

    def dynamics(self, x, u):
        return self._model.step_raw(x, u)

    def dynamics_jacobian(self, x, u):
        return self._model.step_jacobian(x, u)

    def dynamics_jacobian_batch(self, xs, us):
        fn = getattr(self._model, "step_jacobian_batch", None)
        if fn is not None:
            return fn(xs, us)
        pairs = [self._model.step_jacobian(x, u) for x, u in zip(xs, us)]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    def stage_cost(self, x, u):
        return self._mpc._stage_value(x, u)

    def stage_quadratic(self, x, u):
        if self._general:
            sc = self._mpc.stage_cost
            lx = 2.0 * (sc.Qxx @ x + sc.Qxu @ u + sc.qx)
            lu = 2.0 * (sc.Quu @ u + sc.Qxu.T @ x + sc.qu)
            return lx, lu, 2.0 * sc.Qxx, 2.0 * sc.Quu, 2.0 * sc.Qxu
        lu = self._R2 @ u
        if self._identity_space:
            d = x - self._s_ref
            return self._W2 @ d, lu, self._W2, self._R2, self._lxu_zero
        y = self._model.observe(x)
        Jh = self._model.observe_jacobian(x)
        d = y - self._s_ref
        lx = Jh.T @ (self._W2 @ d)
        lxx = Jh.T @ self._W2 @ Jh
        return lx, lu, lxx, self._R2, self._lxu_zero

    def stage_quadratic_batch(self, xs, us):
        K = xs.shape[0]
        if self._general:
            sc = self._mpc.stage_cost
            lx = 2.0 * (xs @ sc.Qxx.T + us @ sc.Qxu.T + sc.qx)
            lu = 2.0 * (us @ sc.Quu.T + xs @ sc.Qxu + sc.qu)
            lxx = np.broadcast_to(2.0 * sc.Qxx, (K, *sc.Qxx.shape))
            luu = np.broadcast_to(2.0 * sc.Quu, (K, *sc.Quu.shape))
            lxu = np.broadcast_to(2.0 * sc.Qxu, (K, *sc.Qxu.shape))
            return lx, lu, lxx, luu, lxu
        lu = us @ self._R2.T
        luu = np.broadcast_to(self._R2, (K, *self._R2.shape))
        lxu = np.broadcast_to(self._lxu_zero, (K, *self._lxu_zero.shape))
        if self._identity_space:
            lx = (xs - self._s_ref) @ self._W2.T
            lxx = np.broadcast_to(self._W2, (K, *self._W2.shape))
            return lx, lu, lxx, luu, lxu
        jac_fn = getattr(self._model, "observe_jacobian_batch", None)
        if jac_fn is not None:
            Jh = jac_fn(xs)
        else:
            Jh = np.stack([self._model.observe_jacobian(x) for x in xs])
        D = self._model.observe_batch(xs) - self._s_ref
        JhT = Jh.transpose(0, 2, 1)
        lx = np.matmul(JhT, (D @ self._W2.T)[:, :, None])[:, :, 0]
        lxx = np.matmul(JhT, np.matmul(self._W2, Jh))
        return lx, lu, lxx, luu, lxu

    def terminal_cost(self, x):
        return self._mpc._terminal_value(x)

    def terminal_quadratic(self, x):
        tc = self._mpc.terminal_cost
        n = self._model.state_dim
        if isinstance(tc, ZeroTerminalCost):
            return np.zeros(n), np.zeros((n, n))
        if isinstance(tc, QuadraticTerminalCost):
            return tc.quadratic(x)
        if self._identity_space:
            return tc.quadratic(x)
        z = self._model.observe(x)
        Jh = self._model.observe_jacobian(x)
        gz, gzz = tc.quadratic(z)
        return Jh.T @ gz, Jh.T @ gzz @ Jh


@dataclass(frozen=True, eq=False)
class ParameterizedMpc:
    """Finite-horizon discounted MPC scheme over a fixed prediction model.

    `cost_space` selects whether the tracking stage and terminal costs read
    the plant state directly ("state") or its observation ("observation").
    """

    N: int
    gamma: float
    stage_cost: object
    terminal_cost: object
    model: object
    input_bounds: tuple = None
    cost_space: str = "state"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"horizon must be >= 1, got {self.N}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.cost_space not in ("state", "observation"):
            raise ValueError(f"unknown cost space {self.cost_space!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "gamma", float(self.gamma))

        model = self.model
        tracked = model.obs_dim if self.cost_space == "observation" else model.state_dim
        sc = self.stage_cost
        if isinstance(sc, QuadraticStageCost):
            if sc.tracked_dim != tracked:
                raise ValueError(
                    f"stage cost tracks {sc.tracked_dim} entries, "
                    f"cost space has {tracked}"
                )
        elif isinstance(sc, GeneralQuadraticCost):
            if self.cost_space != "state":
                raise ValueError("general quadratic stage costs require state cost space")
            if sc.state_dim != model.state_dim:
                raise ValueError("stage cost state dimension does not match the model")
        else:
            raise TypeError(f"unsupported stage cost type {type(sc).__name__}")
        if sc.action_dim != model.action_dim:
            raise ValueError("stage cost action dimension does not match the model")

        tc = self.terminal_cost
        if isinstance(tc, QuadraticTerminalCost):
            if tc.P.shape[0] != model.state_dim:
                raise ValueError("terminal cost dimension does not match the model")
        elif isinstance(tc, SmoothedNormTerminalCost):
            if tc.ref.size != tracked:
                raise ValueError("terminal reference does not match the cost space")
        elif not isinstance(tc, ZeroTerminalCost):
            raise TypeError(f"unsupported terminal cost type {type(tc).__name__}")

        if self.input_bounds is not None:
            lo = _readonly(self.input_bounds[0], (model.action_dim,))
            hi = _readonly(self.input_bounds[1], (model.action_dim,))
            if np.any(lo >= hi):
                raise ValueError("input bounds must satisfy lower < upper")
            object.__setattr__(self, "input_bounds", (lo, hi))

    def __eq__(self, other):
        if not isinstance(other, ParameterizedMpc):
            return NotImplemented
        if self.input_bounds is None or other.input_bounds is None:
            bounds_equal = self.input_bounds is None and other.input_bounds is None
        else:
            bounds_equal = np.array_equal(
                self.input_bounds[0], other.input_bounds[0]
            ) and np.array_equal(self.input_bounds[1], other.input_bounds[1])
        return (
            self.N == other.N
            and self.gamma == other.gamma
            and self.cost_space == other.cost_space
            and bounds_equal
            and self.stage_cost == other.stage_cost
            and self.terminal_cost == other.terminal_cost
            and self.model == other.model
        )

    # -- cost-space plumbing ------------------------------------------------

    def _cost_vec(self, x: np.ndarray) -> np.ndarray:
        if self.cost_space == "state":
            return x
        return self.model.observe(x)

    def _stage_value(self, x, a) -> float:
        if isinstance(self.stage_cost, GeneralQuadraticCost):
            return self.stage_cost.evaluate(x, a)
        return self.stage_cost.evaluate(self._cost_vec(x), a)

    def _terminal_value(self, x) -> float:
        tc = self.terminal_cost
        if isinstance(tc, ZeroTerminalCost):
            return 0.0
        if isinstance(tc, QuadraticTerminalCost):
            return tc.evaluate(x)
        return tc.evaluate(self._cost_vec(x))

    # -- solving ------------------------------------------------------------

    def is_linear_quadratic(self) -> bool:
        """True when the exact dynamic-programming backend applies."""
        return (
            isinstance(self.model, LinearModel)
            and self.input_bounds is None
            and self.cost_space == "state"
            and isinstance(self.terminal_cost, (ZeroTerminalCost, QuadraticTerminalCost))
        )

    def solve(self, state, warm_start=None, method=None, max_iter=None) -> MpcSolution:
        """Minimize the discounted horizon objective from `state`.

        `warm_start` seeds the iLQR backend with an initial control sequence
        of shape (N, action_dim). `method` forces a backend ("riccati" or
        "ilqr"); by default linear-quadratic schemes use the exact sweep.
        `max_iter` caps iLQR iterations (None uses the solver default).
        """
        s0 = np.asarray(state, dtype=float).reshape(-1)
        if s0.size != self.model.state_dim:
            raise ValueError(
                f"state has dimension {s0.size}, expected {self.model.state_dim}"
            )
        if not np.all(np.isfinite(s0)):
            raise ValueError("state contains non-finite entries")
        if method is None:
            method = "riccati" if self.is_linear_quadratic() else "ilqr"
        if method == "riccati":
            if not self.is_linear_quadratic():
                raise ValueError("exact sweep requires an unconstrained linear-quadratic scheme")
            solution = self._solve_riccati(s0)
        elif method == "ilqr":
            solution = self._solve_ilqr(s0, warm_start, max_iter)
        else:
            raise ValueError(f"unknown solve method {method!r}")
        self._check_solution(s0, solution)
        return solution

    def _solve_riccati(self, s0: np.ndarray) -> MpcSolution:
        A, B = self.model.A, self.model.B
        n, m = A.shape[0], B.shape[1]
        sc = self.stage_cost
        if isinstance(sc, QuadraticStageCost):
            W = sc.W
            Qxx, Quu, Qxu = W, sc.R, np.zeros((n, m))
            qx, qu = -(W @ sc.s_ref), np.zeros(m)
            q0 = float(sc.s_ref @ W @ sc.s_ref) + sc.theta3
        else:
            Qxx, Quu, Qxu = sc.Qxx, sc.Quu, sc.Qxu
            qx, qu, q0 = sc.qx, sc.qu, sc.q0
        tc = self.terminal_cost
        if isinstance(tc, QuadraticTerminalCost):
            P_T, p_T, c_T = tc.P, tc.p, tc.c
        else:
            P_T, p_T, c_T = np.zeros((n, n)), np.zeros(n), 0.0

        Ks, ks = _affine_riccati_sweep(
            A, B, Qxx, Quu, Qxu, qx, qu, q0, self.gamma, self.N, P_T, p_T, c_T
        )

        xs = np.empty((self.N + 1, n))
        us = np.empty((self.N, m))
        xs[0] = s0
        J = 0.0
        discount = 1.0
        for k in range(self.N):
            us[k] = -(Ks[k] @ xs[k] + ks[k])
            J += discount * self._stage_value(xs[k], us[k])
            xs[k + 1] = self.model.step_raw(xs[k], us[k])
            discount *= self.gamma
        J += discount * self._terminal_value(xs[self.N])
        return MpcSolution(
            states=xs, actions=us, objective=float(J), converged=True, iterations=1
        )

    def _solve_ilqr(self, s0: np.ndarray, warm_start, max_iter=None) -> MpcSolution:
        problem = _IlqrProblem(self)
        if max_iter is None:
            result = solve_ilqr(problem, s0, u_init=warm_start)
        else:
            result = solve_ilqr(problem, s0, u_init=warm_start, max_iter=max_iter)
        return MpcSolution(
            states=result.states,
            actions=result.actions,
            objective=result.objective,
            converged=result.converged,
            iterations=result.iterations,
        )

    def _check_solution(self, s0: np.ndarray, sol: MpcSolution) -> None:
        if not np.isfinite(sol.objective):
            raise NumericalError("solver returned a non-finite objective")
        if not np.array_equal(sol.states[0], s0):
            raise NumericalError("solution does not start at the query state")
        worst = 0.0
        for k in range(self.N):
            predicted = self.model.step_raw(sol.states[k], sol.actions[k])
            worst = max(worst, float(np.max(np.abs(predicted - sol.states[k + 1]))))
        if worst > DYNAMICS_CONSISTENCY_TOL:
            raise NumericalError(
                f"solution violates model dynamics by {worst:.3e} "
                f"(tolerance {DYNAMICS_CONSISTENCY_TOL:.1e})"
            )
        if self.input_bounds is not None:
            lo, hi = self.input_bounds
            if np.any(sol.actions < lo - 1e-12) or np.any(sol.actions > hi + 1e-12):
                raise NumericalError("solution actions violate the input bounds")

    # -- policy / value interfaces -------------------------------------------

    def policy(self, state, warm_start=None) -> np.ndarray:
        """First action of the open-loop optimum."""
        return self.solve(state, warm_start=warm_start).actions[0].copy()

    def value(self, state, warm_start=None) -> float:
        """Optimal discounted horizon objective from `state`."""
        return self.solve(state, warm_start=warm_start).objective

    def action_value(self, state, action, warm_start=None, max_iter=None) -> float:
        """Horizon objective with the first action pinned to `action`.

        Equals stage cost plus gamma times the (N-1)-horizon optimal value of
        the model's prediction; for N = 1 the tail is the terminal cost.
        """
        s = np.asarray(state, dtype=float).reshape(-1)
        a = np.asarray(action, dtype=float).reshape(-1)
        if a.size != self.model.action_dim:
            raise ValueError(
                f"action has dimension {a.size}, expected {self.model.action_dim}"
            )
        if self.input_bounds is not None:
            lo, hi = self.input_bounds
            if np.any(a < lo - 1e-12) or np.any(a > hi + 1e-12):
                raise ValueError("action lies outside the input bounds")
        stage = self._stage_value(s, a)
        successor = self.model.step_raw(s, a)
        if self.N == 1:
            tail = self._terminal_value(successor)
        else:
            tail = replace(self, N=self.N - 1).solve(
                successor, warm_start=warm_start, max_iter=max_iter
            ).objective
        return stage + self.gamma * tail

    # -- parameter plumbing ---------------------------------------------------

    def with_stage_params(self, params) -> "ParameterizedMpc":
        return replace(self, stage_cost=self.stage_cost.with_params(params))

    def with_model(self, model) -> "ParameterizedMpc":
        return replace(self, model=model)


def modified_stage_cost(lqr: DiscountedLqr, wrong_model: LinearModel, state, action) -> float:
    """Stage cost that compensates a wrong linear model.

    Optimal action value minus the discounted optimal value of the wrong
    model's prediction. Together with the optimal value function as terminal
    cost, an MPC planning through the wrong model with this stage cost
    reproduces the optimal policy and value exactly.
    """
    s = np.asarray(state, dtype=float).reshape(-1)
    a = np.asarray(action, dtype=float).reshape(-1)
    predicted = wrong_model.step(s, a)
    return lqr.optimal_action_value(s, a) - lqr.gamma * lqr.optimal_value(predicted)


def modified_cost_mpc(lqr: DiscountedLqr, wrong_model: LinearModel, N: int) -> ParameterizedMpc:
    """MPC over a wrong linear model that still recovers the optimal policy.

    Builds the quadratic expansion of `modified_stage_cost` (which carries
    state-action cross terms) and uses the optimal value function as the
    terminal cost.
    """
    A, B, P, g = lqr.A, lqr.B, lqr.P, lqr.gamma
    At, Bt = wrong_model.A, wrong_model.B
    stage = GeneralQuadraticCost(
        Qxx=lqr.Qw + g * (A.T @ P @ A - At.T @ P @ At),
        Quu=lqr.Rw + g * (B.T @ P @ B - Bt.T @ P @ Bt),
        Qxu=g * (A.T @ P @ B - At.T @ P @ Bt),
        qx=np.zeros(A.shape[0]),
        qu=np.zeros(B.shape[1]),
        q0=0.0,
    )
    return ParameterizedMpc(
        N=N,
        gamma=g,
        stage_cost=stage,
        terminal_cost=QuadraticTerminalCost(P=P),
        model=wrong_model,
        input_bounds=None,
        cost_space="state",
    )


# -- persistence --------------------------------------------------------------


def _stage_cost_to_json(sc) -> dict:
    if isinstance(sc, QuadraticStageCost):
        return {
            "kind": "tracking",
            "C_W": sc.C_W.tolist(),
            "C_R": sc.C_R.tolist(),
            "theta3": sc.theta3,
            "s_ref": sc.s_ref.tolist(),
        }
    return {
        "kind": "general",
        "Qxx": sc.Qxx.tolist(),
        "Quu": sc.Quu.tolist(),
        "Qxu": sc.Qxu.tolist(),
        "qx": sc.qx.tolist(),
        "qu": sc.qu.tolist(),
        "q0": sc.q0,
    }


def _stage_cost_from_json(data: dict):
    if data["kind"] == "tracking":
        return QuadraticStageCost(
            C_W=data["C_W"], C_R=data["C_R"], theta3=data["theta3"], s_ref=data["s_ref"]
        )
    if data["kind"] == "general":
        return GeneralQuadraticCost(
            Qxx=data["Qxx"],
            Quu=data["Quu"],
            Qxu=data["Qxu"],
            qx=data["qx"],
            qu=data["qu"],
            q0=data["q0"],
        )
    raise ValueError(f"unknown stage cost kind {data['kind']!r}")


def _terminal_cost_to_json(tc) -> dict:
    if isinstance(tc, ZeroTerminalCost):
        return {"kind": "zero"}
    if isinstance(tc, QuadraticTerminalCost):
        return {"kind": "quadratic", "P": tc.P.tolist(), "p": tc.p.tolist(), "c": tc.c}
    return {"kind": "smoothed_norm", "ref": tc.ref.tolist(), "smoothing": tc.smoothing}


def _terminal_cost_from_json(data: dict):
    if data["kind"] == "zero":
        return ZeroTerminalCost()
    if data["kind"] == "quadratic":
        return QuadraticTerminalCost(P=data["P"], p=data["p"], c=data["c"])
    if data["kind"] == "smoothed_norm":
        return SmoothedNormTerminalCost(ref=data["ref"], smoothing=data["smoothing"])
    raise ValueError(f"unknown terminal cost kind {data['kind']!r}")


def _model_to_json(model) -> dict:
    if isinstance(model, LinearModel):
        return {"kind": "linear", "A": model.A.tolist(), "B": model.B.tolist()}
    if isinstance(model, PendulumPlant):
        return {
            "kind": "pendulum",
            "m": model.m,
            "l": model.l,
            "g": model.g,
            "u_bound": model.u_bound,
            "dt": model.dt,
        }
    if isinstance(model, CartpolePlant):
        return {
            "kind": "cartpole",
            "m_c": model.m_c,
            "m_p": model.m_p,
            "l": model.l,
            "mu_f": model.mu_f,
            "g": model.g,
            "u_bound": model.u_bound,
            "dt": model.dt,
        }
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _model_from_json(data: dict):
    kind = data["kind"]
    if kind == "linear":
        return LinearModel(A=data["A"], B=data["B"])
    if kind == "pendulum":
        return PendulumPlant(
            m=data["m"], l=data["l"], g=data["g"], u_bound=data["u_bound"], dt=data["dt"]
        )
    if kind == "cartpole":
        return CartpolePlant(
            m_c=data["m_c"],
            m_p=data["m_p"],
            l=data["l"],
            mu_f=data["mu_f"],
            g=data["g"],
            u_bound=data["u_bound"],
            dt=data["dt"],
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_mpc(mpc: ParameterizedMpc, path) -> None:
    """Write a scheme to JSON; floats round-trip bit-exactly through load."""
    payload = {
        "N": mpc.N,
        "gamma": mpc.gamma,
        "cost_space": mpc.cost_space,
        "input_bounds": None
        if mpc.input_bounds is None
        else {"lower": mpc.input_bounds[0].tolist(), "upper": mpc.input_bounds[1].tolist()},
        "stage_cost": _stage_cost_to_json(mpc.stage_cost),
        "terminal_cost": _terminal_cost_to_json(mpc.terminal_cost),
        "model": _model_to_json(mpc.model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_mpc(path) -> ParameterizedMpc:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    bounds = data["input_bounds"]
    return ParameterizedMpc(
        N=data["N"],
        gamma=data["gamma"],
        stage_cost=_stage_cost_from_json(data["stage_cost"]),
        terminal_cost=_terminal_cost_from_json(data["terminal_cost"]),
        model=_model_from_json(data["model"]),
        input_bounds=None if bounds is None else (bounds["lower"], bounds["upper"]),
        cost_space=data["cost_space"],
    )


@dataclass(frozen=True)
class ValueEquivalenceReport:
    """Outcome of the randomized value-equivalence check for modified costs."""

    instances: int
    states_per_instance: int
    horizon: int
    tolerance: float
    max_action_error: float
    max_value_error: float
    max_action_value_error: float

    @property
    def passed(self) -> bool:
        return (
            self.max_action_error <= self.tolerance
            and self.max_value_error <= self.tolerance
            and self.max_action_value_error <= self.tolerance
        )


def _random_lq_instance(rng: np.random.Generator, dim: int = None):
    """A random discounted LQ problem plus a deliberately wrong linear model."""
    n = int(rng.integers(2, 5)) if dim is None else int(dim)
    m = int(rng.integers(1, 3))
    A = rng.normal(size=(n, n))
    radius = max(abs(np.linalg.eigvals(A)))
    A *= rng.uniform(0.4, 1.0) / max(radius, 1e-9)
    B = rng.normal(size=(n, m))
    M = rng.normal(size=(n, n))
    Qw = M.T @ M + 0.1 * np.eye(n)
    Mr = rng.normal(size=(m, m))
    Rw = Mr.T @ Mr + 0.1 * np.eye(m)
    gamma = float(rng.uniform(0.8, 0.95))
    lqr = solve_riccati(A, B, Qw, Rw, gamma)
    wrong = LinearModel(
        A=A + 0.3 * rng.normal(size=(n, n)), B=B + 0.3 * rng.normal(size=(n, m))
    )
    return lqr, wrong


def verify_value_equivalence(
    instances: int = 100,
    states_per_instance: int = 100,
    horizon: int = 20,
    seed: int = 0,
    tolerance: float = 1e-6,
    dim: int = None,
) -> ValueEquivalenceReport:
    """Check that modified-cost MPC matches the optimal controller exactly.

    For random discounted LQ problems and random wrong models, builds the
    MPC whose stage cost compensates the wrong model (`modified_cost_mpc`)
    and compares, at random states, its first action, its objective, and its
    one-step action value against the infinite-horizon optimal policy, value,
    and Q function. All three errors should sit at solver round-off
    regardless of how wrong the model is. `dim` fixes the state dimension
    (None draws it per instance).
    """
    if instances < 1 or states_per_instance < 1:
        raise ValueError("instances and states_per_instance must be >= 1")
    if dim is not None and dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng([int(seed), 0x54484D31])
    max_action_error = 0.0
    max_value_error = 0.0
    max_action_value_error = 0.0
    for _ in range(instances):
        lqr, wrong = _random_lq_instance(rng, dim=dim)
        mpc = modified_cost_mpc(lqr, wrong, N=horizon)
        n, m = lqr.B.shape
        for _ in range(states_per_instance):
            x = rng.normal(size=n)
            a = rng.normal(size=m)
            solution = mpc.solve(x)
            action_error = float(
                np.max(np.abs(solution.actions[0] - lqr.optimal_policy(x)))
            )
            v_star = lqr.optimal_value(x)
            value_error = abs(solution.objective - v_star) / (1.0 + abs(v_star))
            q_star = lqr.optimal_action_value(x, a)
            q_error = abs(mpc.action_value(x, a) - q_star) / (1.0 + abs(q_star))
            max_action_error = max(max_action_error, action_error)
            max_value_error = max(max_value_error, value_error)
            max_action_value_error = max(max_action_value_error, q_error)
    return ValueEquivalenceReport(
        instances=instances,
        states_per_instance=states_per_instance,
        horizon=horizon,
        tolerance=float(tolerance),
        max_action_error=max_action_error,
        max_value_error=max_value_error,
        max_action_value_error=max_action_value_error,
    )
