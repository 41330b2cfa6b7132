"""Reverse-mode tape over small dense arrays, layers, optimizers, checkpoints."""

from rlforge.nn.tape import (
    Tensor,
    concat,
    constant,
    gather_rows,
    huber,
    layer_norm,
    log_softmax,
    maximum,
    minimum,
    select_last_axis,
    softmax,
    take_axis,
)
from rlforge.nn.layers import Dense, Mlp, MlpSpec, init_uniform_fan_in
from rlforge.nn.optim import DecayedAdam, RmsProp, zero_grads
from rlforge.nn.checkpoint import load_params, save_params

__all__ = [
    "Tensor",
    "concat",
    "constant",
    "gather_rows",
    "huber",
    "layer_norm",
    "log_softmax",
    "maximum",
    "minimum",
    "select_last_axis",
    "softmax",
    "take_axis",
    "Dense",
    "Mlp",
    "MlpSpec",
    "init_uniform_fan_in",
    "DecayedAdam",
    "RmsProp",
    "zero_grads",
    "load_params",
    "save_params",
]
