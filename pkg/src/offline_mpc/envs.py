"""The three simulated plants: true dynamics, stage costs, observation maps.

Each plant exposes a one-step discrete transition (`step`), the true stage
cost, an observation map y = h(s), analytic Jacobians of both, and the
model-mismatch machinery used to build deliberately wrong MPC models.

The linear plant is an exact discrete-time map. The pendulum and cartpole
integrate their continuous dynamics with classical fourth-order Runge-Kutta
at the task sampling time; their step Jacobians chain the analytic
continuous-time Jacobians through the integrator stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import normalize_angle

# Nominal linear dynamics and the fixed perturbation blocks scaled by alpha.
LINEAR_A_NOMINAL = np.array(
    [
        [1.0, 0.0, 0.1, 0.0],
        [0.0, 1.0, 0.0, 0.1],
        [0.0, 0.0, 0.9, 0.0],
        [0.0, 0.0, 0.0, 0.9],
    ]
)
LINEAR_B_NOMINAL = np.array(
    [
        [0.0, 0.0],
        [0.0, 0.0],
        [0.1, 0.0],
        [0.0, 0.1],
    ]
)
LINEAR_A_PERTURBATION = 1e-2 * np.array(
    [
        [0.68, -1.15, -2.29, -2.42],
        [1.57, 2.06, 0.53, 1.15],
        [0.22, 2.17, 1.58, -2.49],
        [1.79, -2.33, 1.15, -1.62],
    ]
)
LINEAR_B_PERTURBATION = 1e-2 * np.array(
    [
        [1.82, 0.21],
        [-1.00, -0.39],
        [-2.36, -1.88],
        [0.85, 0.74],
    ]
)
for _m in (
    LINEAR_A_NOMINAL,
    LINEAR_B_NOMINAL,
    LINEAR_A_PERTURBATION,
    LINEAR_B_PERTURBATION,
):
    _m.flags.writeable = False


def _check_state(state: np.ndarray, dim: int) -> np.ndarray:
    s = np.asarray(state, dtype=float).reshape(-1)
    if s.size != dim:
        raise ValueError(f"state has dimension {s.size}, expected {dim}")
    if not np.all(np.isfinite(s)):
        raise ValueError("state contains non-finite entries")
    return s


@dataclass(frozen=True)
class LinearPlant:
    """Four-dimensional point mass s=[x, y, xdot, ydot] with force input."""

    alpha: float = 0.0
    dt: float = 0.1

    env_id = "linear"
    state_dim = 4
    action_dim = 2
    obs_dim = 4
    u_bound = None
    angle_index = None

    @property
    def A(self) -> np.ndarray:
        return LINEAR_A_NOMINAL + self.alpha * LINEAR_A_PERTURBATION

    @property
    def B(self) -> np.ndarray:
        return LINEAR_B_NOMINAL + self.alpha * LINEAR_B_PERTURBATION

    def step(self, state, action) -> np.ndarray:
        s = _check_state(state, 4)
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
        count = np.asarray(states).shape[0]
        return (
            np.broadcast_to(self.A, (count, 4, 4)).copy(),
            np.broadcast_to(self.B, (count, 4, 2)).copy(),
        )

    def stage_cost(self, state, action) -> float:
        s = np.asarray(state, dtype=float).reshape(-1)
        a = np.asarray(action, dtype=float).reshape(-1)
        return float(
            9.0 * (s[0] ** 2 + s[1] ** 2)
            + (s[2] ** 2 + s[3] ** 2)
            + 0.1 * (a[0] ** 2 + a[1] ** 2)
        )

    def observe(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float).reshape(-1).copy()

    def observe_batch(self, states) -> np.ndarray:
        return np.asarray(states, dtype=float).copy()

    def observe_jacobian(self, state) -> np.ndarray:
        return np.eye(4)

    def observe_jacobian_batch(self, states) -> np.ndarray:
        count = np.asarray(states).shape[0]
        return np.broadcast_to(np.eye(4), (count, 4, 4)).copy()

    def model_params(self) -> np.ndarray:
        """Flattened (A, B) entries; the fully parameterized MPC model."""
        return np.concatenate([self.A.ravel(), self.B.ravel()])

    def clamp(self, action) -> np.ndarray:
        return np.asarray(action, dtype=float).reshape(-1).copy()


class _Rk4Plant:
    """Shared Runge-Kutta integration for the continuous-time plants."""

    def derivative(self, s: np.ndarray, u: float) -> np.ndarray:
        raise NotImplementedError

    def derivative_jacobian(self, s: np.ndarray, u: float):
        raise NotImplementedError

    def derivative_jacobian_batch(self, S: np.ndarray, U: np.ndarray):
        raise NotImplementedError

    def _normalize(self, s: np.ndarray) -> np.ndarray:
        s = s.copy()
        s[self.angle_index] = normalize_angle(s[self.angle_index])
        return s

    def clamp(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=float).reshape(-1)
        return np.clip(a, -self.u_bound, self.u_bound)

    def step_raw(self, state, action) -> np.ndarray:
        """One RK4 step without wrapping the angle coordinate.

        Model rollouts inside the trajectory optimizer use this so integrated
        trajectories stay continuous; the observation map is periodic in the
        angle, so costs are unaffected by the missing wrap.
        """
        s = _check_state(state, self.state_dim)
        u = float(self.clamp(action)[0])
        dt = self.dt
        k1 = self.derivative(s, u)
        k2 = self.derivative(s + 0.5 * dt * k1, u)
        k3 = self.derivative(s + 0.5 * dt * k2, u)
        k4 = self.derivative(s + dt * k3, u)
        return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step(self, state, action) -> np.ndarray:
        return self._normalize(self.step_raw(state, action))

    def step_raw_batch(self, states, actions) -> np.ndarray:
        """Vectorized RK4 over rows of `states`, without angle wrapping."""
        S = np.asarray(states, dtype=float)
        U = np.clip(np.asarray(actions, dtype=float).reshape(len(S)), -self.u_bound, self.u_bound)
        dt = self.dt
        k1 = self.derivative_batch(S, U)
        k2 = self.derivative_batch(S + 0.5 * dt * k1, U)
        k3 = self.derivative_batch(S + 0.5 * dt * k2, U)
        k4 = self.derivative_batch(S + dt * k3, U)
        return S + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step_substepped(self, state, action, substeps: int) -> np.ndarray:
        """Reference integration of the same interval with `substeps` RK4 steps."""
        s = _check_state(state, self.state_dim)
        u = float(self.clamp(action)[0])
        h = self.dt / substeps
        for _ in range(substeps):
            k1 = self.derivative(s, u)
            k2 = self.derivative(s + 0.5 * h * k1, u)
            k3 = self.derivative(s + 0.5 * h * k2, u)
            k4 = self.derivative(s + h * k3, u)
            s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self._normalize(s)

    def step_jacobian(self, state, action):
        """Exact Jacobian of the RK4 map w.r.t. state and (unclamped) action."""
        s = _check_state(state, self.state_dim)
        u = float(self.clamp(action)[0])
        dt = self.dt
        n = self.state_dim
        eye = np.eye(n)

        k1 = self.derivative(s, u)
        s2 = s + 0.5 * dt * k1
        k2 = self.derivative(s2, u)
        s3 = s + 0.5 * dt * k2
        k3 = self.derivative(s3, u)
        s4 = s + dt * k3

        A1, B1 = self.derivative_jacobian(s, u)
        A2, B2 = self.derivative_jacobian(s2, u)
        A3, B3 = self.derivative_jacobian(s3, u)
        A4, B4 = self.derivative_jacobian(s4, u)

        dk1_ds, dk1_du = A1, B1
        dk2_ds = A2 @ (eye + 0.5 * dt * dk1_ds)
        dk2_du = A2 @ (0.5 * dt * dk1_du) + B2
        dk3_ds = A3 @ (eye + 0.5 * dt * dk2_ds)
        dk3_du = A3 @ (0.5 * dt * dk2_du) + B3
        dk4_ds = A4 @ (eye + dt * dk3_ds)
        dk4_du = A4 @ (dt * dk3_du) + B4

        Fx = eye + dt / 6.0 * (dk1_ds + 2.0 * dk2_ds + 2.0 * dk3_ds + dk4_ds)
        Fu = dt / 6.0 * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
        return Fx, Fu.reshape(n, 1)

    def step_jacobian_batch(self, states, actions):
        """step_jacobian for every (state, action) row at once.

        Returns (Fx, Fu) with shapes (K, n, n) and (K, n, 1); same RK4 chain
        rule as the scalar version, composed with batched matmuls.
        """
        S = np.asarray(states, dtype=float)
        U = np.clip(
            np.asarray(actions, dtype=float).reshape(len(S)), -self.u_bound, self.u_bound
        )
        dt = self.dt
        eye = np.eye(self.state_dim)

        k1 = self.derivative_batch(S, U)
        S2 = S + 0.5 * dt * k1
        k2 = self.derivative_batch(S2, U)
        S3 = S + 0.5 * dt * k2
        S4 = S + dt * self.derivative_batch(S3, U)

        A1, B1 = self.derivative_jacobian_batch(S, U)
        A2, B2 = self.derivative_jacobian_batch(S2, U)
        A3, B3 = self.derivative_jacobian_batch(S3, U)
        A4, B4 = self.derivative_jacobian_batch(S4, U)

        dk1_ds, dk1_du = A1, B1
        dk2_ds = A2 @ (eye + 0.5 * dt * dk1_ds)
        dk2_du = A2 @ (0.5 * dt * dk1_du) + B2
        dk3_ds = A3 @ (eye + 0.5 * dt * dk2_ds)
        dk3_du = A3 @ (0.5 * dt * dk2_du) + B3
        dk4_ds = A4 @ (eye + dt * dk3_ds)
        dk4_du = A4 @ (dt * dk3_du) + B4

        Fx = eye + dt / 6.0 * (dk1_ds + 2.0 * dk2_ds + 2.0 * dk3_ds + dk4_ds)
        Fu = dt / 6.0 * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
        return Fx, Fu


@dataclass(frozen=True)
class PendulumPlant(_Rk4Plant):
    """Torque-limited rod pendulum, state [phi, phidot], phi = 0 upright."""

    m: float = 1.0
    l: float = 1.0
    g: float = 9.8
    u_bound: float = 2.0
    dt: float = 0.05

    env_id = "pendulum"
    state_dim = 2
    action_dim = 1
    obs_dim = 3
    angle_index = 0

    def derivative(self, s: np.ndarray, u: float) -> np.ndarray:
        phi, phidot = s
        phiddot = 1.5 * self.g / self.l * math.sin(phi) + 3.0 / (self.m * self.l**2) * u
        return np.array([phidot, phiddot])

    def derivative_batch(self, S: np.ndarray, U: np.ndarray) -> np.ndarray:
        phidd = 1.5 * self.g / self.l * np.sin(S[:, 0]) + 3.0 / (self.m * self.l**2) * U
        return np.column_stack([S[:, 1], phidd])

    def derivative_jacobian(self, s: np.ndarray, u: float):
        phi = s[0]
        A = np.array([[0.0, 1.0], [1.5 * self.g / self.l * math.cos(phi), 0.0]])
        B = np.array([0.0, 3.0 / (self.m * self.l**2)])
        return A, B

    def derivative_jacobian_batch(self, S: np.ndarray, U: np.ndarray):
        count = len(S)
        A = np.zeros((count, 2, 2))
        A[:, 0, 1] = 1.0
        A[:, 1, 0] = 1.5 * self.g / self.l * np.cos(S[:, 0])
        B = np.zeros((count, 2, 1))
        B[:, 1, 0] = 3.0 / (self.m * self.l**2)
        return A, B

    def stage_cost(self, state, action) -> float:
        phi = normalize_angle(float(np.asarray(state).reshape(-1)[0]))
        phidot = float(np.asarray(state).reshape(-1)[1])
        u = float(np.asarray(action).reshape(-1)[0])
        return phi**2 + 0.1 * phidot**2 + 0.1 * u**2

    def observe(self, state) -> np.ndarray:
        phi, phidot = np.asarray(state, dtype=float).reshape(-1)
        return np.array([math.cos(phi), math.sin(phi), phidot])

    def observe_batch(self, states) -> np.ndarray:
        S = np.asarray(states, dtype=float)
        return np.column_stack([np.cos(S[:, 0]), np.sin(S[:, 0]), S[:, 1]])

    def observe_jacobian(self, state) -> np.ndarray:
        phi = float(np.asarray(state).reshape(-1)[0])
        return np.array(
            [
                [-math.sin(phi), 0.0],
                [math.cos(phi), 0.0],
                [0.0, 1.0],
            ]
        )

    def observe_jacobian_batch(self, states) -> np.ndarray:
        S = np.asarray(states, dtype=float)
        J = np.zeros((len(S), 3, 2))
        J[:, 0, 0] = -np.sin(S[:, 0])
        J[:, 1, 0] = np.cos(S[:, 0])
        J[:, 2, 1] = 1.0
        return J

    def model_params(self) -> np.ndarray:
        return np.array([self.m, self.l])

    def with_model_params(self, params) -> "PendulumPlant":
        m, l = (float(v) for v in np.asarray(params).reshape(-1))
        return replace(self, m=m, l=l)


@dataclass(frozen=True)
class CartpolePlant(_Rk4Plant):
    """Cart with a hinged pole, state [x, xdot, phi, phidot], phi = 0 upright."""

    m_c: float = 0.2
    m_p: float = 0.2
    l: float = 0.5
    mu_f: float = 0.5
    g: float = 9.8
    u_bound: float = 2.0
    dt: float = 0.05

    env_id = "cartpole"
    state_dim = 4
    action_dim = 1
    obs_dim = 5
    angle_index = 2

    def _accelerations(self, s: np.ndarray, u: float):
        _, xdot, phi, phidot = s
        M = self.m_c + self.m_p
        c, sn = math.cos(phi), math.sin(phi)
        inner = (self.mu_f * xdot - u - self.m_p * self.l * phidot**2 * sn) / M
        den = self.l * (4.0 / 3.0 - self.m_p * c**2 / M)
        phiddot = (self.g * sn + c * inner) / den
        xddot = (
            u - self.mu_f * xdot + self.m_p * self.l * (phidot**2 * sn - phiddot * c)
        ) / M
        return xddot, phiddot

    def derivative(self, s: np.ndarray, u: float) -> np.ndarray:
        xddot, phiddot = self._accelerations(s, u)
        return np.array([s[1], xddot, s[3], phiddot])

    def derivative_batch(self, S: np.ndarray, U: np.ndarray) -> np.ndarray:
        xdot, phi, phidot = S[:, 1], S[:, 2], S[:, 3]
        M = self.m_c + self.m_p
        c, sn = np.cos(phi), np.sin(phi)
        inner = (self.mu_f * xdot - U - self.m_p * self.l * phidot**2 * sn) / M
        den = self.l * (4.0 / 3.0 - self.m_p * c**2 / M)
        phiddot = (self.g * sn + c * inner) / den
        xddot = (
            U - self.mu_f * xdot + self.m_p * self.l * (phidot**2 * sn - phiddot * c)
        ) / M
        return np.column_stack([xdot, xddot, phidot, phiddot])

    def derivative_jacobian(self, s: np.ndarray, u: float):
        _, xdot, phi, phidot = s
        M = self.m_c + self.m_p
        mp, l, g, mu = self.m_p, self.l, self.g, self.mu_f
        c, sn = math.cos(phi), math.sin(phi)

        inner = (mu * xdot - u - mp * l * phidot**2 * sn) / M
        num = g * sn + c * inner
        den = l * (4.0 / 3.0 - mp * c**2 / M)
        phiddot = num / den

        dinner_dxdot = mu / M
        dinner_dphi = -mp * l * phidot**2 * c / M
        dinner_dphidot = -2.0 * mp * l * phidot * sn / M
        dinner_du = -1.0 / M

        dnum_dxdot = c * dinner_dxdot
        dnum_dphi = g * c - sn * inner + c * dinner_dphi
        dnum_dphidot = c * dinner_dphidot
        dnum_du = c * dinner_du
        dden_dphi = 2.0 * l * mp * c * sn / M

        dphidd_dxdot = dnum_dxdot / den
        dphidd_dphi = (dnum_dphi * den - num * dden_dphi) / den**2
        dphidd_dphidot = dnum_dphidot / den
        dphidd_du = dnum_du / den

        dxdd_dxdot = (-mu - mp * l * dphidd_dxdot * c) / M
        dxdd_dphi = (
            mp * l * (phidot**2 * c - dphidd_dphi * c + phiddot * sn)
        ) / M
        dxdd_dphidot = (mp * l * (2.0 * phidot * sn - dphidd_dphidot * c)) / M
        dxdd_du = (1.0 - mp * l * dphidd_du * c) / M

        A = np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [0.0, dxdd_dxdot, dxdd_dphi, dxdd_dphidot],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, dphidd_dxdot, dphidd_dphi, dphidd_dphidot],
            ]
        )
        B = np.array([0.0, dxdd_du, 0.0, dphidd_du])
        return A, B

    def derivative_jacobian_batch(self, S: np.ndarray, U: np.ndarray):
        xdot, phi, phidot = S[:, 1], S[:, 2], S[:, 3]
        M = self.m_c + self.m_p
        mp, l, g, mu = self.m_p, self.l, self.g, self.mu_f
        c, sn = np.cos(phi), np.sin(phi)

        inner = (mu * xdot - U - mp * l * phidot**2 * sn) / M
        num = g * sn + c * inner
        den = l * (4.0 / 3.0 - mp * c**2 / M)
        phiddot = num / den

        dinner_dxdot = mu / M
        dinner_dphi = -mp * l * phidot**2 * c / M
        dinner_dphidot = -2.0 * mp * l * phidot * sn / M
        dinner_du = -1.0 / M

        dnum_dxdot = c * dinner_dxdot
        dnum_dphi = g * c - sn * inner + c * dinner_dphi
        dnum_dphidot = c * dinner_dphidot
        dnum_du = c * dinner_du
        dden_dphi = 2.0 * l * mp * c * sn / M

        dphidd_dxdot = dnum_dxdot / den
        dphidd_dphi = (dnum_dphi * den - num * dden_dphi) / den**2
        dphidd_dphidot = dnum_dphidot / den
        dphidd_du = dnum_du / den

        dxdd_dxdot = (-mu - mp * l * dphidd_dxdot * c) / M
        dxdd_dphi = (mp * l * (phidot**2 * c - dphidd_dphi * c + phiddot * sn)) / M
        dxdd_dphidot = (mp * l * (2.0 * phidot * sn - dphidd_dphidot * c)) / M
        dxdd_du = (1.0 - mp * l * dphidd_du * c) / M

        count = len(S)
        A = np.zeros((count, 4, 4))
        A[:, 0, 1] = 1.0
        A[:, 1, 1] = dxdd_dxdot
        A[:, 1, 2] = dxdd_dphi
        A[:, 1, 3] = dxdd_dphidot
        A[:, 2, 3] = 1.0
        A[:, 3, 1] = dphidd_dxdot
        A[:, 3, 2] = dphidd_dphi
        A[:, 3, 3] = dphidd_dphidot
        B = np.zeros((count, 4, 1))
        B[:, 1, 0] = dxdd_du
        B[:, 3, 0] = dphidd_du
        return A, B

    def stage_cost(self, state, action) -> float:
        x, xdot, phi, phidot = np.asarray(state, dtype=float).reshape(-1)
        phi = normalize_angle(phi)
        u = float(np.asarray(action).reshape(-1)[0])
        return 2.0 * x**2 + phi**2 + 0.1 * xdot**2 + 0.1 * phidot**2 + 0.1 * u**2

    def observe(self, state) -> np.ndarray:
        x, xdot, phi, phidot = np.asarray(state, dtype=float).reshape(-1)
        return np.array([x, xdot, math.cos(phi), math.sin(phi), phidot])

    def observe_batch(self, states) -> np.ndarray:
        S = np.asarray(states, dtype=float)
        return np.column_stack(
            [S[:, 0], S[:, 1], np.cos(S[:, 2]), np.sin(S[:, 2]), S[:, 3]]
        )

    def observe_jacobian(self, state) -> np.ndarray:
        phi = float(np.asarray(state).reshape(-1)[2])
        J = np.zeros((5, 4))
        J[0, 0] = 1.0
        J[1, 1] = 1.0
        J[2, 2] = -math.sin(phi)
        J[3, 2] = math.cos(phi)
        J[4, 3] = 1.0
        return J

    def observe_jacobian_batch(self, states) -> np.ndarray:
        S = np.asarray(states, dtype=float)
        J = np.zeros((len(S), 5, 4))
        J[:, 0, 0] = 1.0
        J[:, 1, 1] = 1.0
        J[:, 2, 2] = -np.sin(S[:, 2])
        J[:, 3, 2] = np.cos(S[:, 2])
        J[:, 4, 3] = 1.0
        return J

    def model_params(self) -> np.ndarray:
        return np.array([self.m_c, self.m_p, self.mu_f, self.l])

    def with_model_params(self, params) -> "CartpolePlant":
        m_c, m_p, mu_f, l = (float(v) for v in np.asarray(params).reshape(-1))
        return replace(self, m_c=m_c, m_p=m_p, mu_f=mu_f, l=l)


@dataclass(frozen=True)
class ModelMismatch:
    """Per-parameter offsets drawn once from alpha-scaled uniform ranges."""

    alpha: float
    seed: int
    draws: tuple

    # Parameter names and half-widths of the uniform ranges at alpha = 1.
    RANGES = {
        "linear": (),
        "pendulum": (("m", 0.5), ("l", 0.5)),
        "cartpole": (("m_c", 0.1), ("m_p", 0.1), ("mu_f", 0.25), ("l", 0.25)),
    }

    @classmethod
    def sample(cls, env_id: str, alpha: float, seed: int) -> "ModelMismatch":
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        ranges = cls.RANGES[env_id]
        rng = np.random.default_rng([int(seed), 0x4D49534D])
        draws = tuple(
            (name, float(alpha * rng.uniform(-half, half))) for name, half in ranges
        )
        return cls(alpha=float(alpha), seed=int(seed), draws=draws)

    def offsets(self) -> dict:
        return dict(self.draws)


def make_plant(env_id: str, alpha: float = 0.0):
    """Construct the true plant for an environment identifier.

    Only the linear plant's true dynamics depend on alpha; the nonlinear
    plants are always simulated with their true physical parameters, and
    alpha enters through the mismatched MPC model instead.
    """
    if env_id == "linear":
        return LinearPlant(alpha=float(alpha))
    if env_id == "pendulum":
        return PendulumPlant()
    if env_id == "cartpole":
        return CartpolePlant()
    raise ValueError(f"unknown environment id {env_id!r}")


def nominal_model(plant, mismatch: ModelMismatch):
    """The (generally wrong) plant model handed to the MPC schemes."""
    if isinstance(plant, LinearPlant):
        return LinearPlant(alpha=0.0, dt=plant.dt)
    off = mismatch.offsets()
    if isinstance(plant, PendulumPlant):
        return replace(plant, m=plant.m + off["m"], l=plant.l + off["l"])
    if isinstance(plant, CartpolePlant):
        return replace(
            plant,
            m_c=plant.m_c + off["m_c"],
            m_p=plant.m_p + off["m_p"],
            mu_f=plant.mu_f + off["mu_f"],
            l=plant.l + off["l"],
        )
    raise TypeError(f"unsupported plant type {type(plant).__name__}")


def step(plant, state, action) -> np.ndarray:
    return plant.step(state, action)


def stage_cost(plant, state, action) -> float:
    return plant.stage_cost(state, action)


def observe(plant, state) -> np.ndarray:
    return plant.observe(state)
