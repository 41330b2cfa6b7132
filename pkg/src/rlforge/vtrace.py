"""Truncated importance-sampling value corrections for off-policy segments.

Given an n-step behavior segment, ``compute_vtrace`` produces corrected
value targets

    v_s = V(x_s) + sum_{t=s}^{s+n-1} gamma^(t-s) (prod_{i=s}^{t-1} c_i) delta_t V
    delta_t V = rho_t (r_t + gamma V(x_{t+1}) - V(x_t))

with rho_t = min(rho_bar, pi/mu) and c_i = min(c_bar, pi/mu), plus the
policy-gradient advantages

    pg_advantage_s = rho_s (r_s + gamma v_{s+1} - V(x_s)),  v_{s+n} := V(x_{s+n}).

The implementation runs the backward recursion
``a_s = delta_s + gamma c_s a_{s+1}``; the equivalent direct summation lives
in the test suite as an independent oracle.  Segments must not span episode
boundaries; for a terminal segment the caller passes bootstrap value 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, NumericError, ShapeError
from rlforge.nn.tape import Tensor, constant, mul, reduce_sum, scale, square


@dataclass(frozen=True)
class VTraceConfig:
    """Truncation thresholds, discount, and loss mixing weights."""

    rho_bar: float = 1.0
    c_bar: float = 1.0
    gamma: float = 0.99
    baseline_cost: float = 0.5
    entropy_cost: float = 6e-4

    def __post_init__(self):
        if self.rho_bar < 1.0:
            raise ConfigError(f"rho_bar must be >= 1, got {self.rho_bar}")
        if self.c_bar < 0.0 or self.c_bar > self.rho_bar:
            raise ConfigError(f"c_bar must lie in [0, rho_bar], got {self.c_bar}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.baseline_cost < 0 or self.entropy_cost < 0:
            raise ConfigError("loss costs must be non-negative")


@dataclass(frozen=True)
class VTraceResult:
    targets: np.ndarray          # v_s, length n
    pg_advantages: np.ndarray    # rho_s (r_s + gamma v_{s+1} - V(x_s)), length n
    truncated_rhos: np.ndarray
    truncated_cs: np.ndarray


def compute_vtrace(values, rewards, ratios, cfg: VTraceConfig) -> VTraceResult:
    """Corrected targets for one segment.

    ``values`` has length n+1 (the last entry is the bootstrap value at the
    segment's end), ``rewards`` and ``ratios`` have length n, where
    ``ratios[t]`` is pi(a_t|x_t) / mu(a_t|x_t) under the current and the
    behavior policy.  On-policy (all ratios 1, thresholds >= 1) this reduces
    to the n-step Bellman target.
    """
    values = np.asarray(values, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    ratios = np.asarray(ratios, dtype=np.float64)
    n = rewards.shape[0]
    if n == 0:
        raise ShapeError("empty segment")
    if values.shape != (n + 1,) or ratios.shape != (n,):
        raise ShapeError(
            f"length mismatch: values {values.shape} (want {(n + 1,)}), ratios {ratios.shape} (want {(n,)})"
        )
    for name, arr in (("values", values), ("rewards", rewards), ("ratios", ratios)):
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite entries in {name}")
    if np.any(ratios < 0.0):
        raise NumericError("negative importance ratios")

    rhos = np.minimum(cfg.rho_bar, ratios)
    cs = np.minimum(cfg.c_bar, ratios)
    deltas = rhos * (rewards + cfg.gamma * values[1:] - values[:-1])

    acc = 0.0
    corrections = np.empty(n, dtype=np.float64)
    for t in range(n - 1, -1, -1):
        acc = deltas[t] + cfg.gamma * cs[t] * acc
        corrections[t] = acc
    targets = values[:-1] + corrections

    next_targets = np.append(targets[1:], values[n])
    pg_advantages = rhos * (rewards + cfg.gamma * next_targets - values[:-1])
    return VTraceResult(targets, pg_advantages, rhos, cs)


# ---------------------------------------------------------------------------
# Loss builders realizing the two gradient directions
# ---------------------------------------------------------------------------


def value_loss(targets: np.ndarray, predictions: Tensor) -> Tensor:
    """0.5 * sum (v_s - V(x_s))^2; d/dtheta is -(v_s - V) dV/dtheta.

    ``targets`` enters as plain numbers so no gradient flows through the
    corrected targets themselves.
    """
    t = np.asarray(targets, dtype=np.float64)
    if predictions.shape != t.shape:
        raise ShapeError(f"targets {t.shape} vs predictions {predictions.shape}")
    return scale(reduce_sum(square(constant(t) - predictions)), 0.5)


def policy_loss(advantages: np.ndarray, chosen_log_probs: Tensor, entropies: Tensor | None = None,
                entropy_cost: float = 0.0) -> Tensor:
    """-sum advantage_s * log pi(a_s|x_s), plus entropy_cost * (-H) if given.

    Advantages are plain numbers (already truncation-corrected); gradient
    flows only through the log-probabilities and entropies.
    """
    adv = np.asarray(advantages, dtype=np.float64)
    if chosen_log_probs.shape != adv.shape:
        raise ShapeError(f"advantages {adv.shape} vs log_probs {chosen_log_probs.shape}")
    loss = scale(reduce_sum(mul(constant(adv), chosen_log_probs)), -1.0)
    if entropy_cost and entropies is not None:
        loss = loss + scale(reduce_sum(entropies), -entropy_cost)
    return loss
