"""Offline fitting of MPC stage-cost (and optionally model) parameters.

Given a frozen value function V and a logged transition (s, a, s+, c), the
value-corrected regression residual is

    r(theta) = c + gamma V(in(s+)) - gamma V(in(f_theta(s, a))) - l_theta(s, a)

where f_theta is the scheme's prediction model, l_theta its quadratic stage
cost, and in(.) the same input map (observation or identity) used when V was
fit. Minimizing mean r^2 makes the scheme's stage cost absorb both the true
cost and the value difference induced by model error, so the scheme plans
well even through a wrong model. With `learn_model` the model parameters are
fit jointly: analytic gradients for linear (A, B) models, central finite
differences (relative step 1e-6) for physical parameters.

The learner never calls the MPC solver; everything is evaluated directly on
the cost, the model's one-step map, and V. An l2 penalty keeps theta near
its initial value, weighted by `l2_weight` (default 1e-3 divided by the
parameter count, i.e. 1e-3 times the mean squared deviation).

`vphi` can be any object exposing `forward_batch(X) -> (K,)` and
`grad_input_batch(X) -> (K, d)`; `MlpValueFunction` does, and analytic value
functions are easily wrapped the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, NumericalError, Transition
from .mpc import LinearModel, ParameterizedMpc, QuadraticStageCost
from .optim import Adam

DEFAULT_L2_NUMERATOR = 1e-3
FD_RELATIVE_STEP = 1e-6
DIVERGENCE_FACTOR = 1e4


@dataclass(frozen=True)
class LearnConfig:
    """Configuration for residual regression over a scheme's parameters."""

    theta_init: ParameterizedMpc
    learn_model: bool = False
    l2_weight: float = None
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.theta_init, ParameterizedMpc):
            raise TypeError("theta_init must be a ParameterizedMpc")
        if not isinstance(self.theta_init.stage_cost, QuadraticStageCost):
            raise TypeError("learning requires a trainable quadratic stage cost")
        if self.l2_weight is not None and self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class ResidualSample:
    """One transition's regression target, prediction, and residual."""

    target: float
    prediction: float
    residual: float


def _theta_vector(mpc: ParameterizedMpc, learn_model: bool) -> np.ndarray:
    theta = mpc.stage_cost.get_params()
    if learn_model:
        theta = np.concatenate([theta, mpc.model.model_params()])
    return theta


def _rebuild(mpc: ParameterizedMpc, theta: np.ndarray, learn_model: bool) -> ParameterizedMpc:
    n_cost = mpc.stage_cost.num_params
    out = mpc.with_stage_params(theta[:n_cost])
    if learn_model:
        out = out.with_model(mpc.model.with_model_params(theta[n_cost:]))
    return out


def resolve_l2_weight(cfg: LearnConfig, num_params: int) -> float:
    if cfg.l2_weight is not None:
        return float(cfg.l2_weight)
    return DEFAULT_L2_NUMERATOR / num_params


def _step_batch(model, S: np.ndarray, A: np.ndarray) -> np.ndarray:
    if hasattr(model, "step_raw_batch"):
        return model.step_raw_batch(S, A)
    return np.stack([model.step_raw(s, a) for s, a in zip(S, A)])


def _observe_batch(model, S: np.ndarray) -> np.ndarray:
    if hasattr(model, "observe_batch"):
        return model.observe_batch(S)
    return np.stack([model.observe(s) for s in S])


def _net_inputs(mpc: ParameterizedMpc, S: np.ndarray, input_map) -> np.ndarray:
    if input_map is not None:
        return np.stack([input_map(s) for s in np.asarray(S, dtype=float)])
    if mpc.cost_space == "observation":
        return _observe_batch(mpc.model, S)
    return np.asarray(S, dtype=float)


def _stage_values(sc: QuadraticStageCost, Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    D = Z - sc.s_ref
    W, R = sc.W, sc.R
    return (
        np.einsum("ki,ij,kj->k", D, W, D)
        + np.einsum("ki,ij,kj->k", A, R, A)
        + sc.theta3
    )


def _stage_param_grads(sc: QuadraticStageCost, Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-sample gradient of the stage cost w.r.t. the packed parameters."""
    D = Z - sc.s_ref
    p, m = sc.tracked_dim, sc.action_dim
    tril_p = np.tril_indices(p)
    tril_m = np.tril_indices(m)
    GW = 2.0 * np.einsum("ki,kj,jl->kil", D, D, sc.C_W)[:, tril_p[0], tril_p[1]]
    GR = 2.0 * np.einsum("ki,kj,jl->kil", A, A, sc.C_R)[:, tril_m[0], tril_m[1]]
    ones = np.ones((len(Z), 1))
    return np.concatenate([GW, GR, ones], axis=1)


def _model_fd_step(value: float) -> float:
    return FD_RELATIVE_STEP * max(abs(value), 1.0)


def _residual_core(vphi, mpc, S, A, targets, input_map):
    """Residuals plus the intermediates reused by the gradient."""
    F = _step_batch(mpc.model, S, A)
    Yf = _net_inputs(mpc, F, input_map)
    v_pred = np.asarray(vphi.forward_batch(Yf), dtype=float).reshape(-1)
    Z = S if mpc.cost_space == "state" else _observe_batch(mpc.model, S)
    stage = _stage_values(mpc.stage_cost, Z, A)
    prediction = stage
    residuals = targets - mpc.gamma * v_pred - prediction
    return residuals, F, Yf, Z, prediction


def _check_finite(residuals: np.ndarray, indices) -> None:
    bad = np.flatnonzero(~np.isfinite(residuals))
    if bad.size:
        first = bad[0] if indices is None else indices[bad[0]]
        raise NumericalError(f"non-finite residual at transition index {int(first)}")


def _model_param_grads(vphi, mpc, S, A, F, Yf, input_map) -> np.ndarray:
    """Per-sample gradient of gamma*V(in(f_theta)) w.r.t. model parameters."""
    model = mpc.model
    g_in = np.asarray(vphi.grad_input_batch(Yf), dtype=float)
    if input_map is None and mpc.cost_space == "observation":
        w = np.empty_like(F)
        for k in range(len(F)):
            w[k] = model.observe_jacobian(F[k]).T @ g_in[k]
    elif input_map is None:
        w = g_in
    else:
        w = np.empty_like(F)
        for k in range(len(F)):
            w[k] = _numeric_map_jacobian(input_map, F[k]).T @ g_in[k]

    if isinstance(model, LinearModel):
        K = len(S)
        gA = (w[:, :, None] * S[:, None, :]).reshape(K, -1)
        gB = (w[:, :, None] * A[:, None, :]).reshape(K, -1)
        return mpc.gamma * np.concatenate([gA, gB], axis=1)

    params = model.model_params()
    out = np.empty((len(S), params.size))
    for j in range(params.size):
        h = _model_fd_step(params[j])
        plus, minus = params.copy(), params.copy()
        plus[j] += h
        minus[j] -= h
        dF = (
            _step_batch(model.with_model_params(plus), S, A)
            - _step_batch(model.with_model_params(minus), S, A)
        ) / (2.0 * h)
        out[:, j] = np.sum(w * dF, axis=1)
    return mpc.gamma * out


def _numeric_map_jacobian(input_map, x: np.ndarray) -> np.ndarray:
    y0 = np.asarray(input_map(x), dtype=float)
    J = np.empty((y0.size, x.size))
    for i in range(x.size):
        h = _model_fd_step(x[i])
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(input_map(xp)) - np.asarray(input_map(xm))) / (2.0 * h)
    return J


def residual(vphi, mpc: ParameterizedMpc, t: Transition, input_map=None) -> ResidualSample:
    """Value-corrected residual of a single transition under the scheme."""
    S = t.state[None, :]
    A = t.action[None, :]
    next_inputs = _net_inputs(mpc, t.next_state[None, :], input_map)
    v_next = float(np.asarray(vphi.forward_batch(next_inputs)).reshape(-1)[0])
    residuals, _, _, _, prediction = _residual_core(
        vphi, mpc, S, A, np.array([t.cost + mpc.gamma * v_next]), input_map
    )
    _check_finite(residuals, None)
    target = float(residuals[0] + prediction[0])
    return ResidualSample(
        target=target, prediction=float(prediction[0]), residual=float(residuals[0])
    )


def _loss_and_grad_arrays(
    vphi, mpc, S, A, targets, theta, theta_init, l2, learn_model, input_map, indices=None
):
    residuals, F, Yf, Z, _ = _residual_core(vphi, mpc, S, A, targets, input_map)
    _check_finite(residuals, indices)
    K = len(S)
    dev = theta - theta_init
    loss = float(np.mean(residuals**2) + l2 * dev @ dev)

    G_cost = -_stage_param_grads(mpc.stage_cost, Z, A)
    if learn_model:
        G_model = -_model_param_grads(vphi, mpc, S, A, F, Yf, input_map)
        G = np.concatenate([G_cost, G_model], axis=1)
    else:
        G = G_cost
    grad = 2.0 * (residuals @ G) / K + 2.0 * l2 * dev
    return loss, grad, residuals


def loss_and_grad(vphi, mpc: ParameterizedMpc, batch, cfg: LearnConfig, input_map=None):
    """Regularized mean-squared-residual loss and its full theta gradient.

    `batch` is a non-empty sequence of Transitions; theta is read from `mpc`
    and the regularizer is centered on cfg.theta_init's parameters.
    """
    transitions = list(batch)
    if not transitions:
        raise ValueError("batch must be non-empty")
    S = np.stack([t.state for t in transitions])
    A = np.stack([t.action for t in transitions])
    Sn = np.stack([t.next_state for t in transitions])
    C = np.array([t.cost for t in transitions])
    v_next = np.asarray(
        vphi.forward_batch(_net_inputs(mpc, Sn, input_map)), dtype=float
    ).reshape(-1)
    targets = C + mpc.gamma * v_next

    theta = _theta_vector(mpc, cfg.learn_model)
    theta_init = _theta_vector(cfg.theta_init, cfg.learn_model)
    l2 = resolve_l2_weight(cfg, theta.size)
    loss, grad, _ = _loss_and_grad_arrays(
        vphi, mpc, S, A, targets, theta, theta_init, l2,
        cfg.learn_model, input_map,
    )
    return loss, grad


def learn(vphi, dataset: Dataset, cfg: LearnConfig, input_map=None):
    """Minibatch residual regression from cfg.theta_init over a dataset.

    Returns the learned scheme and a trace of per-epoch records
    {epoch, loss, residual_rms, reg_term}; row 0 is the pre-training state.
    Raises a learner error naming the offending transition on non-finite
    residuals, and a divergence error (with the trace attached) if the loss
    grows far beyond its initial value.
    """
    mpc0 = cfg.theta_init
    S, A, Sn, C = dataset.arrays()
    v_next = np.asarray(
        vphi.forward_batch(_net_inputs(mpc0, Sn, input_map)), dtype=float
    ).reshape(-1)
    targets = C + mpc0.gamma * v_next

    theta_init = _theta_vector(mpc0, cfg.learn_model)
    theta = theta_init.copy()
    l2 = resolve_l2_weight(cfg, theta.size)
    n = len(S)
    rng = np.random.default_rng([int(cfg.seed), 0x4C45524E])
    opt = Adam(cfg.learning_rate)

    def full_metrics(mpc, theta):
        residuals, *_ = _residual_core(vphi, mpc, S, A, targets, input_map)
        _check_finite(residuals, None)
        dev = theta - theta_init
        reg = float(l2 * dev @ dev)
        rms = float(np.sqrt(np.mean(residuals**2)))
        return {"epoch": 0, "loss": rms**2 + reg, "residual_rms": rms, "reg_term": reg}

    mpc = mpc0
    trace = [full_metrics(mpc, theta)]
    # Divergence reference: a near-zero initial loss (already-consistent
    # scheme) must not turn benign optimizer wobble into an abort, so floor
    # the reference at a small fraction of the target scale.
    initial_loss = max(trace[0]["loss"], 1e-6 * (1.0 + float(np.mean(targets**2))))
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            _, grad, _ = _loss_and_grad_arrays(
                vphi, mpc, S[idx], A[idx], targets[idx], theta, theta_init, l2,
                cfg.learn_model, input_map, indices=idx,
            )
            theta = opt.step(theta, grad)
            mpc = _rebuild(mpc0, theta, cfg.learn_model)
        record = full_metrics(mpc, theta)
        record["epoch"] = epoch
        trace.append(record)
        if record["loss"] > DIVERGENCE_FACTOR * initial_loss:
            err = NumericalError(
                f"loss diverged at epoch {epoch}: {record['loss']:.6e} "
                f"(initial {initial_loss:.6e})"
            )
            err.trace = trace
            raise err
    return mpc, trace


def write_learn_trace(trace, path) -> None:
    """Write the per-epoch trace as CSV (epoch, loss, residual_rms, reg_term)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,residual_rms,reg_term\n")
        for row in trace:
            fh.write(
                f"{row['epoch']},{row['loss']!r},{row['residual_rms']!r},{row['reg_term']!r}\n"
            )
