"""RMSProp and Adam-with-decoupled-weight-decay over tape parameters."""

from __future__ import annotations

import numpy as np

from rlforge.core import ConfigError, NumericError
from rlforge.nn.tape import Tensor


def _params_list(params) -> list[Tensor]:
    out = []
    for entry in params:
        tensor = entry[1] if isinstance(entry, tuple) else entry
        if not isinstance(tensor, Tensor) or not tensor.requires_grad:
            raise ConfigError("optimizers take gradient-bearing Tensors")
        out.append(tensor)
    if not out:
        raise ConfigError("optimizer created with no parameters")
    return out


def zero_grads(params) -> None:
    for entry in params:
        tensor = entry[1] if isinstance(entry, tuple) else entry
        tensor.zero_grad()


def _check_finite(tensor: Tensor):
    if tensor.grad is None or not np.all(np.isfinite(tensor.grad)):
        raise NumericError(f"non-finite or missing gradient on {tensor.name or '<param>'}")


class RmsProp:
    """Accumulator update s <- smoothing*s + (1-smoothing)*g^2, then
    param <- param - lr * g / sqrt(s + epsilon)."""

    def __init__(self, params, lr: float = 4.8e-4, smoothing: float = 0.99, epsilon: float = 0.01):
        if lr <= 0 or not 0.0 <= smoothing < 1.0 or epsilon < 0:
            raise ConfigError(f"bad RmsProp config lr={lr} smoothing={smoothing} epsilon={epsilon}")
        self.params = _params_list(params)
        self.lr = lr
        self.smoothing = smoothing
        self.epsilon = epsilon
        self.s = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, s in zip(self.params, self.s):
            _check_finite(p)
            g = p.grad
            s *= self.smoothing
            s += (1.0 - self.smoothing) * g * g
            p.data = p.data - self.lr * g / np.sqrt(s + self.epsilon)

    def zero_grad(self) -> None:
        zero_grads(self.params)


class DecayedAdam:
    """Adam with bias correction and decoupled weight decay.

    param <- param - lr * (m_hat / (sqrt(v_hat) + epsilon) + weight_decay * param)
    so the decay path ignores the gradient entirely.
    """

    def __init__(
        self,
        params,
        lr: float = 1e-4,
        weight_decay: float = 5e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        if lr <= 0 or weight_decay < 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
            raise ConfigError(f"bad DecayedAdam config lr={lr} wd={weight_decay} betas=({beta1},{beta2})")
        self.params = _params_list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            _check_finite(p)
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / b1c
            v_hat = v / b2c
            p.data = p.data - self.lr * (m_hat / (np.sqrt(v_hat) + self.epsilon) + self.weight_decay * p.data)

    def zero_grad(self) -> None:
        zero_grads(self.params)
