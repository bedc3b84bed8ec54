"""Offline dataset generation by rolling out behavior policies on true plants.

The default behavior policy is a mixture: with probability epsilon (annealed
from its initial value down to 0.2 across episodes) a uniform random action,
otherwise the wrapped MPC policy plus Gaussian noise. This trades a learned
exploratory agent for a simple, reproducible source of varied state-action
coverage.

Episodes are independent: episode i draws everything (initial state, action
randomness) from a generator seeded with `seed + i`, so generation is
deterministic and could be parallelized without changing the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, DatasetMeta, Transition, normalize_angle
from .envs import CartpolePlant, LinearPlant, PendulumPlant
from .ilqr import CLOSED_LOOP_MAX_ITER
from .mpc import ParameterizedMpc

EPSILON_FINAL = 0.2
# Random-action half-width for unbounded tasks: wide enough that random
# segments visit states well outside the evaluation envelope (the fitted
# value function must not extrapolate there), narrow enough that episodes
# stay numerically tame on the mildly unstable linear plant.
UNBOUNDED_ACTION_HALF_WIDTH = 8.0
# Linear-task initial states cover twice the evaluation box so the value fit
# and residual regression see the whole evaluated region as interior points.
LINEAR_STATE_HALF_WIDTH = 2.0
POLICY_KINDS = ("uniform_random", "noisy_mpc", "mixture")


@dataclass(frozen=True)
class BehaviorPolicy:
    """Action source for data collection; `mpc` backs the non-random kinds."""

    kind: str = "mixture"
    noise_scale: float = 0.5
    epsilon: float = 1.0
    anneal: bool = True
    mpc: ParameterizedMpc = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown behavior policy kind {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.noise_scale < 0.0:
            raise ValueError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.kind != "uniform_random" and self.mpc is None:
            raise ValueError(f"kind {self.kind!r} requires an mpc")

    def describe(self) -> str:
        if self.kind == "uniform_random":
            return "uniform_random"
        if self.kind == "noisy_mpc":
            return f"noisy_mpc(noise_scale={self.noise_scale!r})"
        return (
            f"mixture(noise_scale={self.noise_scale!r}, "
            f"epsilon={self.epsilon!r}, anneal={self.anneal})"
        )


def _initial_state(plant, rng: np.random.Generator) -> np.ndarray:
    if isinstance(plant, LinearPlant):
        half = LINEAR_STATE_HALF_WIDTH
        return rng.uniform(-half, half, size=4)
    if isinstance(plant, PendulumPlant):
        # Negating a draw from [-pi, pi) lands the angle in (-pi, pi].
        phi = -rng.uniform(-math.pi, math.pi)
        return np.array([phi, rng.uniform(-1.0, 1.0)])
    if isinstance(plant, CartpolePlant):
        return np.array(
            [
                rng.uniform(-0.5, 0.5),
                rng.uniform(-0.2, 0.2),
                normalize_angle(math.pi + rng.uniform(-0.5, 0.5)),
                rng.uniform(-0.2, 0.2),
            ]
        )
    raise TypeError(f"unsupported plant type {type(plant).__name__}")


def _random_action(plant, rng: np.random.Generator) -> np.ndarray:
    if plant.u_bound is None:
        half = UNBOUNDED_ACTION_HALF_WIDTH
        return rng.uniform(-half, half, size=plant.action_dim)
    return rng.uniform(-plant.u_bound, plant.u_bound, size=plant.action_dim)


def _episode_epsilon(policy: BehaviorPolicy, episode: int, episodes: int) -> float:
    if not policy.anneal or episodes <= 1:
        return policy.epsilon
    frac = episode / (episodes - 1)
    return policy.epsilon + frac * (EPSILON_FINAL - policy.epsilon)


def generate(
    plant,
    policy: BehaviorPolicy,
    episodes: int,
    episode_length: int,
    seed: int,
    gamma: float = 0.9,
) -> Dataset:
    """Roll out `episodes` of `episode_length` steps and record all transitions.

    Initial states are randomized per task (linear: uniform box around the
    origin; pendulum: angle uniform over the circle with small velocity;
    cartpole: near-hanging with small velocities). Actions are clamped to plant bounds
    before stepping, and the recorded cost is the true stage cost of the
    clamped action.
    """
    if episodes < 1 or episode_length < 1:
        raise ValueError("episodes and episode_length must be >= 1")
    transitions = []
    for ep in range(episodes):
        rng = np.random.default_rng(int(seed) + ep)
        eps = _episode_epsilon(policy, ep, episodes)
        s = _initial_state(plant, rng)
        warm = None
        for _ in range(episode_length):
            if policy.kind == "uniform_random":
                a = _random_action(plant, rng)
            elif policy.kind == "mixture" and rng.random() < eps:
                a = _random_action(plant, rng)
            else:
                solution = policy.mpc.solve(
                    s, warm_start=warm, max_iter=CLOSED_LOOP_MAX_ITER
                )
                warm = np.vstack([solution.actions[1:], solution.actions[-1:]])
                a = solution.actions[0] + policy.noise_scale * rng.normal(
                    size=plant.action_dim
                )
            a = plant.clamp(a)
            cost = plant.stage_cost(s, a)
            s_next = plant.step(s, a)
            transitions.append(Transition(state=s, action=a, next_state=s_next, cost=cost))
            s = s_next
    meta = DatasetMeta(
        env_id=plant.env_id,
        gamma=float(gamma),
        dt=plant.dt,
        seed=int(seed),
        behavior_policy=policy.describe(),
        episode_length=int(episode_length),
        episode_count=int(episodes),
    )
    return Dataset(transitions=tuple(transitions), meta=meta)
