"""MLP value-function approximator and its temporal-difference fitting loop.

The network is a plain numpy multilayer perceptron: tanh hidden layers,
identity output, and a per-component input normalizer (x - mu) / sigma
estimated from the fitting data and frozen afterwards. Forward, input
gradient, and weight gradient are all analytic; the TD loop is semi-gradient
with a hard-copied target network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, NumericalError
from .optim import Adam


@dataclass(frozen=True)
class TdFitConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 200
    target_refresh_interval: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0 or self.target_refresh_interval < 1:
            raise ValueError("batch_size and target_refresh_interval must be >= 1")


class MlpValueFunction:
    """Feed-forward scalar-output network V(s) with analytic gradients."""

    def __init__(self, weights, biases, input_mean, input_std) -> None:
        self.weights = [np.array(W, dtype=float) for W in weights]
        self.biases = [np.array(b, dtype=float).reshape(-1) for b in biases]
        self.input_mean = np.array(input_mean, dtype=float).reshape(-1)
        self.input_std = np.array(input_std, dtype=float).reshape(-1)
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up layer by layer")
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != b.size:
                raise ValueError("bias size must match layer output width")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output dimension must be 1")
        if np.any(self.input_std <= 0):
            raise ValueError("normalizer standard deviations must be > 0")

    # ---------------------------------------------------------------- setup

    @property
    def layer_widths(self) -> list:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @classmethod
    def initialize(
        cls, layer_widths, seed: int, input_mean=None, input_std=None
    ) -> "MlpValueFunction":
        """Fresh network with uniform Glorot weights and zero biases."""
        widths = [int(w) for w in layer_widths]
        if widths[-1] != 1:
            raise ValueError("last layer width must be 1")
        rng = np.random.default_rng([int(seed), 0x564E4554])
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        n = widths[0]
        mean = np.zeros(n) if input_mean is None else np.asarray(input_mean, dtype=float)
        std = np.ones(n) if input_std is None else np.asarray(input_std, dtype=float)
        return cls(weights, biases, mean, std)

    def copy(self) -> "MlpValueFunction":
        return MlpValueFunction(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.input_mean.copy(),
            self.input_std.copy(),
        )

    # ------------------------------------------------------------- forward

    def _forward_cached(self, X: np.ndarray) -> list:
        """Activations per layer; entry 0 is the normalized input batch."""
        acts = [(X - self.input_mean) / self.input_std]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            pre = acts[-1] @ W.T + b
            acts.append(pre if i == last else np.tanh(pre))
        return acts

    def forward_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected batch of {self.input_dim}-vectors, got {X.shape}")
        return self._forward_cached(X)[-1][:, 0]

    def forward(self, s) -> float:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != self.input_dim:
            raise ValueError(f"input has dimension {s.size}, expected {self.input_dim}")
        return float(self.forward_batch(s[None, :])[0])

    def __call__(self, s) -> float:
        return self.forward(s)

    # ------------------------------------------------------------ gradients

    def _backprop(self, acts: list, gout: np.ndarray):
        """Gradients of sum_n gout[n] * V(x_n) w.r.t. weights and inputs."""
        grads_W, grads_b = [], []
        delta = gout[:, None]  # output layer is linear
        for i in range(len(self.weights) - 1, -1, -1):
            grads_W.append(delta.T @ acts[i])
            grads_b.append(delta.sum(axis=0))
            if i > 0:
                delta = (delta @ self.weights[i]) * (1.0 - acts[i] ** 2)
        grads_W.reverse()
        grads_b.reverse()
        grad_x = (delta @ self.weights[0]) / self.input_std
        return grads_W, grads_b, grad_x

    def grad_input_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        acts = self._forward_cached(X)
        _, _, grad_x = self._backprop(acts, np.ones(X.shape[0]))
        return grad_x

    def grad_input(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        return self.grad_input_batch(s[None, :])[0]

    def grad_weights(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        acts = self._forward_cached(s[None, :])
        grads_W, grads_b, _ = self._backprop(acts, np.ones(1))
        return self._flatten(grads_W, grads_b)

    def _flatten(self, grads_W, grads_b) -> np.ndarray:
        parts = []
        for gW, gb in zip(grads_W, grads_b):
            parts.append(gW.ravel())
            parts.append(gb.ravel())
        return np.concatenate(parts)

    def get_flat_weights(self) -> np.ndarray:
        return self._flatten(self.weights, self.biases)

    def set_flat_weights(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        k = 0
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[k : k + W.size].reshape(W.shape).copy()
            k += W.size
            self.biases[i] = flat[k : k + b.size].copy()
            k += b.size
        if k != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, expected {k}")

    # ----------------------------------------------------------- persistence

    def save(self, path) -> None:
        payload = {
            "layer_widths": self.layer_widths,
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "MlpValueFunction":
        payload = json.loads(Path(path).read_text())
        return cls(
            [np.array(W) for W in payload["weights"]],
            [np.array(b) for b in payload["biases"]],
            np.array(payload["input_mean"]),
            np.array(payload["input_std"]),
        )


class QuadraticValueFunction:
    """Exact quadratic value V(s) = s^T P s.

    Duck-type stand-in for MlpValueFunction wherever only evaluation and
    input gradients are needed (e.g. supplying an analytic LQ value function
    to the offline learner instead of a fitted network).
    """

    def __init__(self, P) -> None:
        self.P = np.array(P, dtype=float)
        if self.P.ndim != 2 or self.P.shape[0] != self.P.shape[1]:
            raise ValueError(f"P must be square, got shape {self.P.shape}")

    def forward_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("ki,ij,kj->k", X, self.P, X)

    def forward(self, s) -> float:
        s = np.asarray(s, dtype=float).reshape(-1)
        return float(s @ self.P @ s)

    def __call__(self, s) -> float:
        return self.forward(s)

    def grad_input_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ (self.P + self.P.T)

    def grad_input(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        return (self.P + self.P.T) @ s


def normalizer_from_data(X: np.ndarray, floor: float = 1e-6):
    """Per-component mean and standard deviation with a positivity floor."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.maximum(std, floor)


def fit_td_arrays(
    v: MlpValueFunction, inputs, next_inputs, costs, gamma: float, cfg: TdFitConfig
):
    """Semi-gradient TD regression of V toward L + gamma * V_target(s_next).

    `inputs` and `next_inputs` are the value-net input vectors for s and
    s_next (already passed through whatever observation map the caller fits
    in); the bootstrap target uses a frozen copy of the network refreshed
    every cfg.target_refresh_interval optimizer steps. Returns the fitted
    network and the per-epoch mean loss trace.
    """
    X = np.asarray(inputs, dtype=float)
    Xn = np.asarray(next_inputs, dtype=float)
    c = np.asarray(costs, dtype=float).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise ValueError("fit_td requires a non-empty dataset")
    if Xn.shape != X.shape or c.size != n:
        raise ValueError("inputs, next_inputs and costs must align")

    net = v.copy()
    opt = Adam(cfg.learning_rate)
    rng = np.random.default_rng([int(cfg.seed), 0x54440000])
    target_values = c + gamma * net.forward_batch(Xn)
    steps = 0
    trace = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            if steps % cfg.target_refresh_interval == 0 and steps > 0:
                target_values = c + gamma * net.forward_batch(Xn)
            y = target_values[idx]
            acts = net._forward_cached(X[idx])
            pred = acts[-1][:, 0]
            err = pred - y
            loss = float(np.mean(err**2))
            if not np.isfinite(loss):
                raise NumericalError(f"TD loss diverged at optimizer step {steps}")
            gout = 2.0 * err / idx.size
            grads_W, grads_b, _ = net._backprop(acts, gout)
            flat = opt.step(net.get_flat_weights(), net._flatten(grads_W, grads_b))
            net.set_flat_weights(flat)
            steps += 1
            epoch_loss += loss
            batches += 1
        trace.append(epoch_loss / max(batches, 1))
    return net, trace


def fit_td(v: MlpValueFunction, dataset: Dataset, cfg: TdFitConfig, input_map=None):
    """Fit V on a transition dataset; gamma comes from the dataset metadata.

    `input_map` converts plant states to value-net inputs (for example an
    observation map that expands angles to cosine/sine); identity when None.
    """
    s, _, sn, c = dataset.arrays()
    if input_map is not None:
        s = np.stack([input_map(x) for x in s])
        sn = np.stack([input_map(x) for x in sn])
    return fit_td_arrays(v, s, sn, c, dataset.meta.gamma, cfg)
