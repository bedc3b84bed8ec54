"""Plant dynamics, Jacobians, observation maps, stage costs, and mismatch."""

import math

import numpy as np
import pytest

from conftest import central_difference
from offline_mpc.envs import (
    CartpolePlant,
    LINEAR_A_NOMINAL,
    LINEAR_B_NOMINAL,
    LinearPlant,
    ModelMismatch,
    PendulumPlant,
    make_plant,
    nominal_model,
)

PLANT_FACTORIES = {
    "linear": lambda: LinearPlant(alpha=0.7),
    "pendulum": PendulumPlant,
    "cartpole": CartpolePlant,
}


def _random_state_action(plant, rng):
    if isinstance(plant, LinearPlant):
        s = rng.uniform(-1.5, 1.5, size=4)
    elif isinstance(plant, PendulumPlant):
        s = np.array([rng.uniform(-2.5, 2.5), rng.uniform(-4.0, 4.0)])
    else:
        s = np.array(
            [
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-2.5, 2.5),
                rng.uniform(-2.0, 2.0),
            ]
        )
    bound = plant.u_bound if plant.u_bound is not None else 2.0
    a = rng.uniform(-bound, bound, size=plant.action_dim)
    return s, a


def test_linear_step_matches_matrices():
    rng = np.random.default_rng(0)
    for alpha in (0.0, 0.5, 1.0, 2.0):
        plant = LinearPlant(alpha=alpha)
        s = rng.normal(size=4)
        a = rng.normal(size=2)
        np.testing.assert_allclose(plant.step(s, a), plant.A @ s + plant.B @ a, atol=1e-14)
        # The perturbation enters linearly in alpha.
        dA = plant.A - np.asarray(LINEAR_A_NOMINAL)
        np.testing.assert_allclose(dA, alpha * (LinearPlant(alpha=1.0).A - LINEAR_A_NOMINAL), atol=1e-14)
    np.testing.assert_allclose(LinearPlant(alpha=0.0).A, LINEAR_A_NOMINAL, atol=0)
    np.testing.assert_allclose(LinearPlant(alpha=0.0).B, LINEAR_B_NOMINAL, atol=0)


def test_linear_stage_cost_hand_formula():
    plant = LinearPlant(alpha=0.0)
    s = np.array([0.3, -0.2, 1.1, 0.4])
    a = np.array([0.7, -0.5])
    expected = 9.0 * (s[0] ** 2 + s[1] ** 2) + s[2] ** 2 + s[3] ** 2 + 0.1 * (a @ a)
    assert plant.stage_cost(s, a) == pytest.approx(expected, rel=1e-12)


def test_pendulum_stage_cost_hand_formula():
    plant = PendulumPlant()
    s = np.array([0.4, -1.2])
    a = np.array([0.8])
    expected = 0.4**2 + 0.1 * 1.2**2 + 0.1 * 0.8**2
    assert plant.stage_cost(s, a) == pytest.approx(expected, rel=1e-12)
    # The angle enters through its wrapped value.
    s_wrapped = np.array([0.4 + 2.0 * math.pi, -1.2])
    assert plant.stage_cost(s_wrapped, a) == pytest.approx(expected, rel=1e-9)


def test_cartpole_stage_cost_hand_formula():
    plant = CartpolePlant()
    s = np.array([0.3, -0.1, 2.0, 0.5])
    a = np.array([1.5])
    expected = (
        2.0 * 0.3**2 + 2.0**2 + 0.1 * 0.1**2 + 0.1 * 0.5**2 + 0.1 * 1.5**2
    )
    assert plant.stage_cost(s, a) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("env_id", sorted(PLANT_FACTORIES))
def test_step_jacobians_match_finite_differences(env_id):
    plant = PLANT_FACTORIES[env_id]()
    rng = np.random.default_rng(7)
    for _ in range(10):
        s, a = _random_state_action(plant, rng)
        Fx, Fu = plant.step_jacobian(s, a)
        for i in range(s.size):
            fd = central_difference(
                lambda x, i=i: plant.step_raw(x, a)[i], s, h=1e-6
            )
            np.testing.assert_allclose(Fx[i], fd, rtol=1e-5, atol=1e-7)
        for i in range(s.size):
            fd = central_difference(
                lambda u, i=i: plant.step_raw(s, u)[i], a, h=1e-6
            )
            np.testing.assert_allclose(Fu[i], fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("env_id", sorted(PLANT_FACTORIES))
def test_batch_jacobians_match_per_state(env_id):
    plant = PLANT_FACTORIES[env_id]()
    rng = np.random.default_rng(8)
    pairs = [_random_state_action(plant, rng) for _ in range(16)]
    S = np.stack([p[0] for p in pairs])
    U = np.stack([p[1] for p in pairs])
    Fx_b, Fu_b = plant.step_jacobian_batch(S, U)
    for k, (s, a) in enumerate(pairs):
        Fx, Fu = plant.step_jacobian(s, a)
        np.testing.assert_array_equal(Fx_b[k], Fx)
        np.testing.assert_array_equal(Fu_b[k], Fu)
    np.testing.assert_allclose(
        plant.step_raw_batch(S, U),
        np.stack([plant.step_raw(s, a) for s, a in pairs]),
        atol=1e-13,
    )


@pytest.mark.parametrize("env_id", sorted(PLANT_FACTORIES))
def test_observe_maps_and_jacobians(env_id):
    plant = PLANT_FACTORIES[env_id]()
    rng = np.random.default_rng(9)
    for _ in range(5):
        s, _ = _random_state_action(plant, rng)
        obs = plant.observe(s)
        Jh = plant.observe_jacobian(s)
        assert obs.shape == (plant.obs_dim,)
        assert Jh.shape == (plant.obs_dim, s.size)
        for i in range(plant.obs_dim):
            fd = central_difference(lambda x, i=i: plant.observe(x)[i], s, h=1e-6)
            np.testing.assert_allclose(Jh[i], fd, rtol=1e-5, atol=1e-7)
    S = np.stack([_random_state_action(plant, rng)[0] for _ in range(6)])
    np.testing.assert_allclose(
        plant.observe_batch(S), np.stack([plant.observe(s) for s in S]), atol=1e-14
    )
    np.testing.assert_allclose(
        plant.observe_jacobian_batch(S),
        np.stack([plant.observe_jacobian(s) for s in S]),
        atol=1e-14,
    )


def test_pendulum_observation_components():
    plant = PendulumPlant()
    s = np.array([0.6, -2.0])
    np.testing.assert_allclose(
        plant.observe(s), [math.cos(0.6), math.sin(0.6), -2.0], atol=1e-14
    )


def test_pendulum_equilibria_and_angle_wrap():
    plant = PendulumPlant()
    # Upright and hanging are exact equilibria of the free system.
    np.testing.assert_allclose(plant.step([0.0, 0.0], [0.0]), [0.0, 0.0], atol=1e-12)
    hang = plant.step([math.pi, 0.0], [0.0])
    assert abs(hang[1]) < 1e-12
    assert abs(abs(hang[0]) - math.pi) < 1e-12
    # States far outside (-pi, pi] come back wrapped.
    s = plant.step([3.5 * math.pi, 0.5], [0.0])
    assert -math.pi < s[0] <= math.pi


def test_cartpole_hanging_equilibrium():
    plant = CartpolePlant()
    s0 = np.array([0.0, 0.0, math.pi, 0.0])
    np.testing.assert_allclose(np.abs(plant.step(s0, [0.0])), np.abs(s0), atol=1e-12)


@pytest.mark.parametrize("factory", [PendulumPlant, CartpolePlant])
def test_rk4_step_agrees_with_substepping(factory):
    # Halving the step via substeps moves the state by less than the
    # integration tolerance we rely on elsewhere.
    plant = factory()
    rng = np.random.default_rng(10)
    for _ in range(5):
        s, a = _random_state_action(plant, rng)
        one = plant.step_raw(s, a)
        fine = plant.step_substepped(s, a, substeps=8)
        np.testing.assert_allclose(one, fine, atol=1e-4)


def test_clamp_behavior():
    pend = PendulumPlant()
    np.testing.assert_allclose(pend.clamp([5.0]), [2.0])
    np.testing.assert_allclose(pend.clamp([-3.0]), [-2.0])
    np.testing.assert_allclose(pend.clamp([0.5]), [0.5])
    lin = LinearPlant(alpha=0.0)
    assert lin.u_bound is None
    np.testing.assert_allclose(lin.clamp([123.0, -456.0]), [123.0, -456.0])


def test_make_plant_and_mismatch_scaling():
    assert isinstance(make_plant("linear", 0.3), LinearPlant)
    assert isinstance(make_plant("pendulum"), PendulumPlant)
    assert isinstance(make_plant("cartpole"), CartpolePlant)
    with pytest.raises(ValueError):
        make_plant("rocket")
    mm0 = ModelMismatch.sample("pendulum", alpha=0.0, seed=3)
    mm1 = ModelMismatch.sample("pendulum", alpha=1.0, seed=3)
    mm2 = ModelMismatch.sample("pendulum", alpha=2.0, seed=3)
    for key, off1 in mm1.offsets().items():
        np.testing.assert_allclose(mm0.offsets()[key], np.zeros_like(off1), atol=1e-14)
        np.testing.assert_allclose(mm2.offsets()[key], 2.0 * np.asarray(off1), rtol=1e-12)


def test_nominal_model_alpha_zero_matches_plant():
    for env_id in ("linear", "pendulum", "cartpole"):
        plant = make_plant(env_id, 0.0) if env_id == "linear" else make_plant(env_id)
        mm = ModelMismatch.sample(env_id, alpha=0.0, seed=0)
        model = nominal_model(plant, mm)
        rng = np.random.default_rng(11)
        for _ in range(5):
            s, a = _random_state_action(plant, rng)
            np.testing.assert_allclose(model.step(s, a), plant.step(s, a), atol=1e-12)


def test_nominal_model_mismatch_changes_dynamics():
    plant = make_plant("pendulum")
    mm = ModelMismatch.sample("pendulum", alpha=1.0, seed=0)
    model = nominal_model(plant, mm)
    rng = np.random.default_rng(12)
    diffs = []
    for _ in range(10):
        s, a = _random_state_action(plant, rng)
        diffs.append(np.linalg.norm(model.step(s, a) - plant.step(s, a)))
    assert max(diffs) > 1e-4


def test_model_params_round_trip():
    for plant in (PendulumPlant(), CartpolePlant()):
        params = plant.model_params()
        rebuilt = plant.with_model_params(params * 1.1)
        np.testing.assert_allclose(rebuilt.model_params(), params * 1.1, rtol=1e-12)
        s, a = _random_state_action(plant, np.random.default_rng(13))
        assert np.linalg.norm(rebuilt.step_raw(s, a) - plant.step_raw(s, a)) > 0
