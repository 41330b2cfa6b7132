"""Max-entropy sequence-model fine-tuning.

Minimizes the action negative log-likelihood J(theta) subject to a policy
entropy floor H >= beta, realized as the Lagrangian J - lambda * (H - beta)
with dual ascent on lambda.  J and H are means over the real (non-padded)
positions of the sampled windows, matching the per-window 1/K averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, ContractError
from rlforge.nn.tape import Tensor, constant, exp, log_softmax, mul, reduce_sum, scale, select_last_axis
from rlforge.seq.model import SequencePolicyModel, stack_windows
from rlforge.seq.tokens import TokenWindow


def default_beta(action_count: int) -> float:
    """Entropy floor used when a config leaves beta unset: half of ln|A|."""
    if action_count < 2:
        raise ConfigError(f"need at least 2 actions, got {action_count}")
    return 0.5 * math.log(action_count)


@dataclass(frozen=True)
class MaentConfig:
    """Entropy floor, dual step size, and the sampling loop's shape."""

    beta: float
    dual_lr: float = 1e-3
    batch: int = 32
    context: int = 4
    buffer_capacity: int = 10_000
    updates_between_rollouts: int = 300

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if self.dual_lr <= 0:
            raise ConfigError(f"dual_lr must be positive, got {self.dual_lr}")
        if self.batch < 1 or self.context < 1 or self.updates_between_rollouts < 1:
            raise ConfigError("batch, context, and updates_between_rollouts must be >= 1")
        if self.buffer_capacity < self.batch:
            raise ConfigError(f"buffer capacity {self.buffer_capacity} below batch {self.batch}")


@dataclass
class DualState:
    """Carries the Lagrange multiplier between updates; never negative."""

    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")


def maent_losses(model: SequencePolicyModel, windows: list[TokenWindow], lam: float, beta: float):
    """Tape scalars (lagrangian, J, H) over one window batch."""
    patches, returns, actions, rewards, mask = stack_windows(windows)
    total = float(mask.sum())
    if total == 0:
        raise ContractError("batch holds only padding")
    logits, _ = model.forward(patches, returns, actions, rewards)
    logp_all = log_softmax(logits)
    chosen = select_last_axis(logp_all, actions)
    j = scale(reduce_sum(mul(chosen, constant(mask))), -1.0 / total)
    neg_ent = reduce_sum(mul(exp(logp_all), logp_all), axis=-1)  # (B, K)
    h = scale(reduce_sum(mul(neg_ent, constant(mask))), -1.0 / total)
    lagrangian = j - scale(h - beta, lam)
    return lagrangian, j, h


def maent_update(
    windows: list[TokenWindow],
    model: SequencePolicyModel,
    cfg: MaentConfig,
    state: DualState,
    optimizer,
) -> dict:
    """One primal gradient step on J - lambda*(H - beta), then dual ascent
    lambda <- max(0, lambda + dual_lr*(beta - H)).  Returns scalar J, H,
    and the updated lambda."""
    if not windows:
        raise ContractError("maent update needs a nonempty window batch")
    lagrangian, j, h = maent_losses(model, windows, state.lam, cfg.beta)
    for _, p in model.parameters():
        p.zero_grad()
    lagrangian.backward()
    optimizer.step()
    h_value = h.item()
    state.lam = max(0.0, state.lam + cfg.dual_lr * (cfg.beta - h_value))
    return {"J": j.item(), "H": h_value, "lam": state.lam, "lagrangian": lagrangian.item()}
