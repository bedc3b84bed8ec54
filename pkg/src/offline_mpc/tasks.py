"""Per-task wiring: nominal MPC schemes, evaluation grids, and input maps.

Each task pairs a true plant with a nominal controller. The linear task's
nominal stage cost equals the plant's true objective; the angle tasks use
hand-tuned quadratic tracking costs on the cos/sin-expanded observation,
which is the usual starting point when the true cost is awkward to encode
directly. The controller's model is the possibly-mismatched one under
study. All downstream stages (data generation, value fitting, residual
learning, closed-loop evaluation) build on these constructors so that the
schemes differ only in what was learned.
"""

from __future__ import annotations

import math

import numpy as np

from .envs import LinearPlant, make_plant, nominal_model
from .lqr_oracle import DiscountedLqr, solve_riccati
from .mpc import (
    LinearModel,
    ParameterizedMpc,
    QuadraticStageCost,
    SmoothedNormTerminalCost,
    ZeroTerminalCost,
)

TASK_IDS = ("linear", "pendulum", "cartpole")
TASK_GAMMA = 0.9
VALUE_HIDDEN_WIDTHS = (64, 64)

MPC_HORIZON = {"linear": 100, "pendulum": 50, "cartpole": 50}

ALPHA_GRID = {
    "linear": (0.0, 0.25, 0.5, 1.0, 1.5, 2.0),
    "pendulum": (0.0, 0.25, 0.5, 0.75, 1.0, 1.5),
    "cartpole": (0.0, 0.25, 0.5, 0.75, 1.0, 1.5),
}

# Observation-space tracking references: upright pole, everything at rest.
OBSERVATION_REFERENCE = {
    "pendulum": (1.0, 0.0, 0.0),
    "cartpole": (0.0, 0.0, 1.0, 0.0, 0.0),
}


def nominal_stage_cost(env_id: str) -> QuadraticStageCost:
    """The task's nominal quadratic stage cost, parameterized by Cholesky factors.

    The linear task penalizes state directly with the plant's true weights;
    the angle tasks penalize the observation (cos/sin-expanded) deviation
    from the upright reference with hand-tuned weights.
    """
    if env_id == "linear":
        return QuadraticStageCost(
            C_W=np.diag([3.0, 3.0, 1.0, 1.0]),
            C_R=np.diag([math.sqrt(0.1), math.sqrt(0.1)]),
            theta3=0.0,
            s_ref=np.zeros(4),
        )
    if env_id == "pendulum":
        return QuadraticStageCost(
            C_W=np.diag([1.0, 1.0, math.sqrt(0.1)]),
            C_R=np.array([[math.sqrt(0.1)]]),
            theta3=0.0,
            s_ref=np.array(OBSERVATION_REFERENCE["pendulum"]),
        )
    if env_id == "cartpole":
        return QuadraticStageCost(
            C_W=np.diag(
                [math.sqrt(3.0), math.sqrt(0.01), math.sqrt(3.0), 1.0, math.sqrt(0.01)]
            ),
            C_R=np.array([[math.sqrt(0.001)]]),
            theta3=0.0,
            s_ref=np.array(OBSERVATION_REFERENCE["cartpole"]),
        )
    raise ValueError(f"unknown environment id {env_id!r}")


def build_mpc(env_id: str, model) -> ParameterizedMpc:
    """Nominal MPC scheme for a task, planning with the given model.

    For the linear task the model is wrapped as (or must already be) a
    `LinearModel`, which makes the scheme exactly linear-quadratic and routes
    it to the Riccati backend. The angle tasks track their observation
    reference under input bounds and a smoothed distance-to-go terminal cost.
    """
    if env_id == "linear":
        if isinstance(model, LinearPlant):
            model = LinearModel.from_plant(model)
        return ParameterizedMpc(
            N=MPC_HORIZON["linear"],
            gamma=TASK_GAMMA,
            stage_cost=nominal_stage_cost("linear"),
            terminal_cost=ZeroTerminalCost(),
            model=model,
            input_bounds=None,
            cost_space="state",
        )
    if env_id in ("pendulum", "cartpole"):
        bound = float(model.u_bound)
        return ParameterizedMpc(
            N=MPC_HORIZON[env_id],
            gamma=TASK_GAMMA,
            stage_cost=nominal_stage_cost(env_id),
            terminal_cost=SmoothedNormTerminalCost(
                ref=np.array(OBSERVATION_REFERENCE[env_id])
            ),
            model=model,
            input_bounds=(
                np.full(model.action_dim, -bound),
                np.full(model.action_dim, bound),
            ),
            cost_space="observation",
        )
    raise ValueError(f"unknown environment id {env_id!r}")


def build_nominal_mpc(env_id: str, mismatch) -> ParameterizedMpc:
    """MPC1 for a mismatch draw: nominal cost, mismatched model."""
    plant = make_plant(env_id, mismatch.alpha)
    return build_mpc(env_id, nominal_model(plant, mismatch))


def value_input_map(env_id: str):
    """State-to-input map used when fitting the value network.

    The angle tasks feed the network the same cos/sin observation the cost
    tracks, so the value function is periodic in the angle by construction;
    the linear task uses raw state (None means identity).
    """
    if env_id == "linear":
        return None
    return make_plant(env_id).observe


def eval_initial_states(env_id: str) -> np.ndarray:
    """Fixed start states that closed-loop evaluation averages over."""
    if env_id == "linear":
        return np.array(
            [
                [1.0, 1.0, 0.0, 0.0],
                [1.0, -1.0, 0.0, 0.0],
                [-1.0, 1.0, 0.0, 0.0],
                [-1.0, -1.0, 0.0, 0.0],
                [1.0, 1.0, 0.5, 0.5],
                [-1.0, -1.0, -0.5, -0.5],
                [1.0, -1.0, -0.5, 0.5],
                [-1.0, 1.0, 0.5, -0.5],
            ]
        )
    if env_id == "pendulum":
        return np.array(
            [
                [math.pi, 0.0],
                [2.5, 0.0],
                [-2.5, 0.0],
                [1.5, 0.0],
                [-1.5, 0.0],
            ]
        )
    if env_id == "cartpole":
        return np.array(
            [
                [0.0, 0.0, math.pi, 0.0],
                [0.5, 0.0, math.pi, 0.0],
                [-0.5, 0.0, math.pi, 0.0],
            ]
        )
    raise ValueError(f"unknown environment id {env_id!r}")


def linear_reference_lqr(alpha: float) -> DiscountedLqr:
    """Discounted LQR on the true linear plant at a given mismatch scale."""
    plant = LinearPlant(alpha=float(alpha))
    return solve_riccati(
        plant.A,
        plant.B,
        Qw=np.diag([9.0, 9.0, 1.0, 1.0]),
        Rw=0.1 * np.eye(2),
        gamma=TASK_GAMMA,
    )
