"""Dense layers and small multi-layer perceptrons on the tape."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, ShapeError
from rlforge.nn.tape import Tensor, add, matmul, relu, tanh

_NONLINEARITIES = {"relu": relu, "tanh": tanh}
_NONLINEARITIES_RAW = {"relu": lambda x: np.maximum(x, 0.0), "tanh": np.tanh}


def init_uniform_fan_in(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine layer ``x @ w + b`` over row-major activations."""

    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, name: str = "dense"):
        self.fan_in = fan_in
        self.fan_out = fan_out
        self.name = name
        self.w = Tensor(init_uniform_fan_in(rng, fan_in, (fan_in, fan_out)), requires_grad=True, name=f"{name}.w")
        self.b = Tensor(init_uniform_fan_in(rng, fan_in, (fan_out,)), requires_grad=True, name=f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.fan_in:
            raise ShapeError(f"{self.name}: input width {x.shape[-1]} != {self.fan_in}")
        return add(matmul(x, self.w), self.b)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward for hot rollout paths."""
        return x @ self.w.data + self.b.data

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input first, output last) plus the hidden nonlinearity."""

    layer_widths: tuple[int, ...]
    nonlinearity: str = "relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ConfigError(f"layer_widths needs >=2 positive entries, got {widths}")
        if self.nonlinearity not in _NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.nonlinearity!r}; pick from {sorted(_NONLINEARITIES)}")
        object.__setattr__(self, "layer_widths", widths)


class Mlp:
    """Feed-forward net; the nonlinearity sits between layers, never after the last."""

    def __init__(self, spec: MlpSpec, rng: np.random.Generator, name: str = "mlp"):
        self.spec = spec
        self.name = name
        widths = spec.layer_widths
        self.layers = [
            Dense(widths[i], widths[i + 1], rng, name=f"{name}.{i}") for i in range(len(widths) - 1)
        ]
        self._act = _NONLINEARITIES[spec.nonlinearity]
        self._act_raw = _NONLINEARITIES_RAW[spec.nonlinearity]

    @property
    def in_width(self) -> int:
        return self.spec.layer_widths[0]

    @property
    def out_width(self) -> int:
        return self.spec.layer_widths[-1]

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = self._act(h)
        return h

    def forward(self, x: Tensor) -> Tensor:
        return self(x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward; bit-identical to the tape path on equal input."""
        h = np.asarray(x, dtype=np.float64)
        for i, layer in enumerate(self.layers):
            h = layer.apply(h)
            if i < len(self.layers) - 1:
                h = self._act_raw(h)
        return h

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def param_values(self) -> tuple[np.ndarray, ...]:
        return tuple(t.data.copy() for _, t in self.parameters())

    def load_values(self, values) -> None:
        params = self.parameters()
        if len(values) != len(params):
            raise ShapeError(f"{self.name}: expected {len(params)} arrays, got {len(values)}")
        for (name, tensor), arr in zip(params, values):
            if tensor.data.shape != arr.shape:
                raise ShapeError(f"{name}: shape {arr.shape} != {tensor.data.shape}")
            tensor.data = np.array(arr, dtype=np.float64, copy=True)
