"""Parameterized MPC: backends, cost classes, Theorem-style identities, files."""

import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import central_difference, relative_gradient_error
from offline_mpc import tasks
from offline_mpc.envs import LinearPlant, ModelMismatch, PendulumPlant, make_plant, nominal_model
from offline_mpc.lqr_oracle import finite_horizon_dp, solve_riccati
from offline_mpc.mpc import (
    GeneralQuadraticCost,
    LinearModel,
    ParameterizedMpc,
    QuadraticStageCost,
    QuadraticTerminalCost,
    SmoothedNormTerminalCost,
    ZeroTerminalCost,
    load_mpc,
    modified_cost_mpc,
    modified_stage_cost,
    save_mpc,
    verify_value_equivalence,
)

LIN_QW = np.diag([9.0, 9.0, 1.0, 1.0])
LIN_RW = 0.1 * np.eye(2)


def test_quadratic_stage_cost_evaluate_and_params():
    rng = np.random.default_rng(0)
    C_W = np.tril(rng.normal(size=(3, 3)))
    C_R = np.tril(rng.normal(size=(2, 2)))
    s_ref = rng.normal(size=3)
    sc = QuadraticStageCost(C_W=C_W, C_R=C_R, theta3=0.7, s_ref=s_ref)
    W, R = C_W @ C_W.T, C_R @ C_R.T
    np.testing.assert_allclose(sc.W, W, atol=1e-14)
    np.testing.assert_allclose(sc.R, R, atol=1e-14)
    assert np.linalg.eigvalsh(sc.W).min() >= -1e-12
    z = rng.normal(size=3)
    a = rng.normal(size=2)
    expected = (z - s_ref) @ W @ (z - s_ref) + a @ R @ a + 0.7
    assert sc.evaluate(z, a) == pytest.approx(expected, rel=1e-12)
    # Parameter vector is (tril(C_W), tril(C_R), theta3) and round-trips.
    params = sc.get_params()
    assert params.size == sc.num_params == 3 * 4 // 2 + 2 * 3 // 2 + 1
    sc2 = sc.with_params(params)
    assert sc2 == sc
    sc3 = sc.with_params(params + 0.1)
    assert sc3 != sc


def test_quadratic_stage_cost_param_gradients():
    rng = np.random.default_rng(1)
    sc = QuadraticStageCost(
        C_W=np.tril(rng.normal(size=(3, 3))),
        C_R=np.tril(rng.normal(size=(2, 2))),
        theta3=0.2,
        s_ref=rng.normal(size=3),
    )
    for _ in range(5):
        z = rng.normal(size=3)
        a = rng.normal(size=2)
        grad = sc.grad_params(z, a)
        fd = central_difference(
            lambda p: sc.with_params(p).evaluate(z, a), sc.get_params(), h=1e-6
        )
        assert relative_gradient_error(grad, fd) < 1e-7


def test_general_quadratic_cost_evaluate():
    rng = np.random.default_rng(2)
    n, m = 3, 2
    Qxx = rng.normal(size=(n, n))
    Qxx = Qxx + Qxx.T
    Quu = rng.normal(size=(m, m))
    Quu = Quu + Quu.T + 4.0 * np.eye(m)
    Qxu = rng.normal(size=(n, m))
    qx = rng.normal(size=n)
    qu = rng.normal(size=m)
    cost = GeneralQuadraticCost(Qxx=Qxx, Quu=Quu, Qxu=Qxu, qx=qx, qu=qu, q0=0.3)
    s = rng.normal(size=n)
    a = rng.normal(size=m)
    expected = s @ Qxx @ s + a @ Quu @ a + 2.0 * s @ Qxu @ a + 2 * qx @ s + 2 * qu @ a + 0.3
    assert cost.evaluate(s, a) == pytest.approx(expected, rel=1e-12)


def test_linear_model_round_trips():
    plant = LinearPlant(alpha=0.4)
    model = LinearModel.from_plant(plant)
    np.testing.assert_array_equal(model.A, plant.A)
    np.testing.assert_array_equal(model.B, plant.B)
    params = model.model_params()
    assert params.size == 16 + 8
    model2 = model.with_model_params(params * 1.5)
    np.testing.assert_allclose(model2.A, model.A * 1.5, atol=1e-14)
    np.testing.assert_allclose(model2.B, model.B * 1.5, atol=1e-14)


def _linear_mpc(alpha=0.0, N=100):
    plant = LinearPlant(alpha=alpha)
    mpc = tasks.build_mpc("linear", plant)
    return replace(mpc, N=N), plant


def test_riccati_backend_matches_dp_oracle():
    mpc, plant = _linear_mpc(alpha=0.3, N=12)
    stages = finite_horizon_dp(plant.A, plant.B, LIN_QW, LIN_RW, mpc.gamma, 12,
                               np.zeros((4, 4)))
    rng = np.random.default_rng(3)
    for _ in range(5):
        s0 = rng.normal(size=4)
        sol = mpc.solve(s0)
        x = s0.copy()
        J, disc = 0.0, 1.0
        for k, (_, K) in enumerate(stages):
            u = -K @ x
            np.testing.assert_allclose(sol.actions[k], u, rtol=1e-8, atol=1e-10)
            J += disc * (x @ LIN_QW @ x + u @ LIN_RW @ u)
            x = plant.A @ x + plant.B @ u
            disc *= mpc.gamma
        assert sol.objective == pytest.approx(J, rel=1e-10)
        P0 = stages[0][0]
        assert sol.objective == pytest.approx(float(s0 @ P0 @ s0), rel=1e-10)


def test_backends_agree_on_linear_quadratic_scheme():
    mpc, _ = _linear_mpc(alpha=0.8, N=25)
    assert mpc.is_linear_quadratic()
    rng = np.random.default_rng(4)
    for _ in range(3):
        s0 = rng.normal(size=4)
        ric = mpc.solve(s0, method="riccati")
        ilq = mpc.solve(s0, method="ilqr")
        np.testing.assert_allclose(ilq.actions, ric.actions, atol=1e-6)
        assert ilq.objective == pytest.approx(ric.objective, abs=1e-8, rel=1e-8)


def test_horizon_invariance_with_stationary_terminal():
    plant = LinearPlant(alpha=0.0)
    lqr = solve_riccati(plant.A, plant.B, LIN_QW, LIN_RW, 0.9)
    base, _ = _linear_mpc(alpha=0.0, N=1)
    mpc_inf = replace(base, terminal_cost=QuadraticTerminalCost(P=lqr.P))
    rng = np.random.default_rng(5)
    states = rng.normal(size=(5, 4))
    for s0 in states:
        expected = lqr.optimal_policy(s0)
        for N in (1, 5, 20, 100):
            action = replace(mpc_inf, N=N).solve(s0).actions[0]
            np.testing.assert_allclose(action, expected, rtol=1e-7, atol=1e-9)


def test_modified_stage_cost_formula():
    rng = np.random.default_rng(6)
    plant = LinearPlant(alpha=0.0)
    lqr = solve_riccati(plant.A, plant.B, LIN_QW, LIN_RW, 0.9)
    wrong = LinearModel(A=plant.A + 0.05 * rng.normal(size=(4, 4)),
                        B=plant.B + 0.05 * rng.normal(size=(4, 2)))
    for _ in range(10):
        s = rng.normal(size=4)
        a = rng.normal(size=2)
        f_wrong = wrong.step(s, a)
        expected = lqr.optimal_action_value(s, a) - 0.9 * lqr.optimal_value(f_wrong)
        assert modified_stage_cost(lqr, wrong, s, a) == pytest.approx(expected, rel=1e-10)


def test_modified_cost_mpc_reproduces_optimal_controller():
    # The compensated scheme is optimal despite planning with a wrong model.
    # Round-off in the planning sweep grows roughly like
    # (gamma * rho(A_wrong - B_wrong @ K)^2)**N, so keep the model perturbation
    # moderate; the identity itself holds for arbitrarily wrong models.
    rng = np.random.default_rng(7)
    plant = LinearPlant(alpha=0.0)
    lqr = solve_riccati(plant.A, plant.B, LIN_QW, LIN_RW, 0.9)
    wrong = LinearModel(A=plant.A + 0.05 * rng.normal(size=(4, 4)),
                        B=plant.B + 0.05 * rng.normal(size=(4, 2)))
    mpc = modified_cost_mpc(lqr, wrong, N=10)
    for _ in range(10):
        s = rng.normal(size=4)
        a = rng.normal(size=2)
        sol = mpc.solve(s)
        np.testing.assert_allclose(sol.actions[0], lqr.optimal_policy(s), atol=1e-8)
        assert sol.objective == pytest.approx(lqr.optimal_value(s), rel=1e-8)
        assert mpc.action_value(s, a) == pytest.approx(
            lqr.optimal_action_value(s, a), rel=1e-8
        )


def test_verify_value_equivalence_small():
    report = verify_value_equivalence(instances=5, states_per_instance=5, horizon=8, seed=0)
    assert report.passed
    assert report.max_action_error < 1e-6


def test_bellman_consistency_linear():
    mpc, _ = _linear_mpc(alpha=0.5, N=40)
    rng = np.random.default_rng(8)
    for _ in range(5):
        s = rng.normal(size=4)
        v = mpc.value(s)
        pi = mpc.policy(s)
        assert mpc.action_value(s, pi) == pytest.approx(v, abs=1e-8, rel=1e-8)
        for _ in range(3):
            a = pi + rng.normal(size=2)
            assert mpc.action_value(s, a) >= v - 1e-8


def test_bellman_consistency_pendulum():
    plant = PendulumPlant()
    mpc = replace(tasks.build_mpc("pendulum", plant), N=12)
    s = np.array([1.1, -0.4])
    v = mpc.value(s)
    pi = mpc.policy(s)
    assert mpc.action_value(s, pi) == pytest.approx(v, abs=1e-6)
    rng = np.random.default_rng(9)
    for _ in range(3):
        a = np.clip(pi + rng.normal(size=1), -2.0, 2.0)
        assert mpc.action_value(s, a) >= v - 1e-6


def test_pendulum_actions_respect_bounds():
    plant = PendulumPlant()
    mpc = replace(tasks.build_mpc("pendulum", plant), N=20)
    sol = mpc.solve(np.array([1.5, 4.0]))
    assert np.all(sol.actions >= -2.0 - 1e-12)
    assert np.all(sol.actions <= 2.0 + 1e-12)
    # Braking a fast swing actually saturates the actuator.
    assert np.max(np.abs(sol.actions)) == pytest.approx(2.0)


def _manual_objective(mpc, s0, actions):
    x = np.asarray(s0, dtype=float)
    J, disc = 0.0, 1.0
    sc = mpc.stage_cost
    for u in actions:
        z = mpc.model.observe(x) if mpc.cost_space == "observation" else x
        J += disc * sc.evaluate(z, u)
        x = mpc.model.step(x, u)
        disc *= mpc.gamma
    z = mpc.model.observe(x) if mpc.cost_space == "observation" else x
    return J + disc * mpc.terminal_cost.evaluate(z)


def test_solution_objective_matches_manual_rollout():
    plant = PendulumPlant()
    mpc = replace(tasks.build_mpc("pendulum", plant), N=10)
    s0 = np.array([0.9, 0.3])
    sol = mpc.solve(s0)
    assert sol.objective == pytest.approx(_manual_objective(mpc, s0, sol.actions), rel=1e-10)
    lin, _ = _linear_mpc(alpha=0.2, N=15)
    s0 = np.array([0.7, -0.4, 0.2, 0.1])
    sol = lin.solve(s0)
    assert sol.objective == pytest.approx(_manual_objective(lin, s0, sol.actions), rel=1e-10)


@pytest.mark.xfail(
    strict=True,
    reason="receding-horizon tracking with the hand-tuned cost stalls in the "
    "hanging well; a swing-up from rest needs a cost or horizon beyond the "
    "shipped task defaults",
)
def test_pendulum_swing_up_from_hanging():
    plant = PendulumPlant()
    mpc = tasks.build_mpc("pendulum", plant)
    s = np.array([math.pi, 0.0])
    warm = None
    for _ in range(100):
        sol = mpc.solve(s, warm_start=warm)
        warm = np.vstack([sol.actions[1:], sol.actions[-1:]])
        s = plant.step(s, sol.actions[0])
    assert abs(s[0]) < 0.2


def test_smoothed_norm_terminal_quadratic_consistency():
    rng = np.random.default_rng(10)
    tc = SmoothedNormTerminalCost(ref=np.array([1.0, 0.0, 0.0]))
    for _ in range(5):
        z = rng.normal(size=3)
        g, H = tc.quadratic(z)
        fd = central_difference(tc.evaluate, z, h=1e-6)
        assert relative_gradient_error(g, fd) < 1e-6
        assert H.shape == (3, 3)
        assert np.linalg.eigvalsh(0.5 * (H + H.T)).min() >= -1e-10


def test_quadratic_terminal_cost():
    rng = np.random.default_rng(11)
    M = rng.normal(size=(3, 3))
    P = M.T @ M
    tc = QuadraticTerminalCost(P=P)
    z = rng.normal(size=3)
    assert tc.evaluate(z) == pytest.approx(float(z @ P @ z), rel=1e-12)
    g, H = tc.quadratic(z)
    np.testing.assert_allclose(g, 2.0 * P @ z, atol=1e-12)
    np.testing.assert_allclose(H, 2.0 * P, atol=1e-12)


def test_zero_terminal_cost():
    assert ZeroTerminalCost().evaluate(np.ones(4)) == 0.0


def test_with_stage_params_and_with_model():
    mpc, _ = _linear_mpc(alpha=0.0, N=5)
    params = mpc.stage_cost.get_params()
    bumped = mpc.with_stage_params(params * 1.1)
    assert bumped.stage_cost != mpc.stage_cost
    assert bumped.model == mpc.model
    other = LinearModel(A=np.eye(4), B=np.zeros((4, 2)))
    swapped = mpc.with_model(other)
    assert swapped.model == other
    assert swapped.stage_cost == mpc.stage_cost


@pytest.mark.parametrize("env_id", ["linear", "pendulum"])
def test_json_round_trip(tmp_path, env_id):
    mm = ModelMismatch.sample(env_id, alpha=0.7, seed=1)
    mpc = tasks.build_nominal_mpc(env_id, mm)
    path = tmp_path / "scheme.json"
    save_mpc(mpc, path)
    loaded = load_mpc(path)
    assert loaded == mpc
    path2 = tmp_path / "scheme2.json"
    save_mpc(loaded, path2)
    assert path2.read_bytes() == path.read_bytes()
    # The reloaded scheme plans identically.
    s0 = tasks.eval_initial_states(env_id)[0] * 0.5
    a1 = replace(mpc, N=8).solve(s0).actions
    a2 = replace(loaded, N=8).solve(s0).actions
    np.testing.assert_array_equal(a1, a2)


def test_nominal_mpc_alpha_zero_is_unmismatched():
    mm = ModelMismatch.sample("linear", alpha=0.0, seed=0)
    mpc = tasks.build_nominal_mpc("linear", mm)
    plant = LinearPlant(alpha=0.0)
    np.testing.assert_allclose(mpc.model.A, plant.A, atol=1e-14)
    np.testing.assert_allclose(mpc.model.B, plant.B, atol=1e-14)
