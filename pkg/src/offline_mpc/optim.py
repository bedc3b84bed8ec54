"""Adaptive moment estimation on flat parameter vectors.

One optimizer implementation shared by the value-net fitting loop and the
offline MPC learner. State (first/second moments, step count) lives in the
instance; `step` consumes a gradient and returns the updated parameters.
"""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {learning_rate}")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        grad = np.asarray(grad, dtype=float)
        if self._m is None:
            self._m = np.zeros_like(params)
            self._v = np.zeros_like(params)
        if grad.shape != params.shape:
            raise ValueError(
                f"gradient shape {grad.shape} does not match parameters {params.shape}"
            )
        self.t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad**2
        m_hat = self._m / (1.0 - self.beta1**self.t)
        v_hat = self._v / (1.0 - self.beta2**self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
