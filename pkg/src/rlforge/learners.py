"""DQN, PPO, and the V-trace actor-critic update rules.

All three learners consume core types (Transition batches for DQN,
Trajectory batches for PPO and V-trace) and apply exactly one optimizer
step per loss they build.  Target assembly (TD targets, GAE, off-policy
corrections) is split from the tape losses so each half can be checked
against straight-line oracles and finite differences independently.
Epsilon schedules and target-network sync cadence are plain functions so
the surrounding training loop owns all counters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, ContractError, ShapeError, Trajectory, Transition
from rlforge.nn.layers import Dense, Mlp, MlpSpec
from rlforge.nn.tape import (
    Tensor,
    clip,
    constant,
    exp,
    huber,
    log_softmax,
    minimum,
    mul,
    reduce_mean,
    reduce_sum,
    reshape,
    scale,
    select_last_axis,
    square,
)
from rlforge.vtrace import VTraceConfig, compute_vtrace, policy_loss, value_loss

MASK_OFFSET = -1e9  # added to logits of invalid actions before any softmax

# Surrogate-pass counts used when building per-task PPO configs.
DEFAULT_SURROGATE_EPOCHS = {"blockmaze": 15, "pdr": 15, "pacgrid": 3}


# ---------------------------------------------------------------------------
# Shared policy + value network
# ---------------------------------------------------------------------------


class PolicyValueNet:
    """MLP trunk feeding a policy head and a scalar value head."""

    def __init__(
        self,
        obs_width: int,
        action_count: int,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (64, 64),
        name: str = "pv",
    ):
        if obs_width < 1 or action_count < 1 or not hidden:
            raise ConfigError(f"bad net dims obs={obs_width} actions={action_count} hidden={hidden}")
        self.obs_width = int(obs_width)
        self.action_count = int(action_count)
        self.trunk = Mlp(MlpSpec((obs_width, *hidden), "relu"), rng, name=f"{name}.trunk")
        self.pi_head = Dense(hidden[-1], action_count, rng, name=f"{name}.pi")
        self.v_head = Dense(hidden[-1], 1, rng, name=f"{name}.v")

    def forward(self, obs: Tensor) -> tuple[Tensor, Tensor]:
        """Tape forward: (logits (B, A), values (B,))."""
        h = self.trunk(obs).relu()
        return self.pi_head(h), reshape(self.v_head(h), (obs.shape[0],))

    def apply(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tape-free forward, bit-identical to ``forward`` on equal input."""
        h = np.maximum(self.trunk.apply(obs), 0.0)
        return self.pi_head.apply(h), self.v_head.apply(h)[..., 0]

    def parameters(self) -> list[tuple[str, Tensor]]:
        return self.trunk.parameters() + self.pi_head.parameters() + self.v_head.parameters()

    def param_values(self) -> tuple[np.ndarray, ...]:
        return tuple(t.data.copy() for _, t in self.parameters())

    def load_values(self, values) -> None:
        params = self.parameters()
        if len(values) != len(params):
            raise ShapeError(f"expected {len(params)} arrays, got {len(values)}")
        for (name, tensor), arr in zip(params, values):
            if tensor.data.shape != arr.shape:
                raise ShapeError(f"{name}: shape {arr.shape} != {tensor.data.shape}")
            tensor.data = np.array(arr, dtype=np.float64, copy=True)


def masked_logits(logits: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Push invalid-action logits onto an effectively -inf plateau."""
    if mask is None:
        return np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != logits.shape:
        raise ShapeError(f"mask shape {mask.shape} != logits shape {logits.shape}")
    if not np.all(mask.sum(axis=-1) >= 1.0):
        raise ContractError("every state needs at least one valid action")
    return np.asarray(logits, dtype=np.float64) + (mask - 1.0) * -MASK_OFFSET


def mask_logits_tensor(logits: Tensor, mask: np.ndarray | None) -> Tensor:
    if mask is None:
        return logits
    return logits + constant(masked_logits(np.zeros(logits.shape), mask))


def log_policy_probs(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Stable log-softmax over the last axis, honoring an action mask."""
    z = masked_logits(logits, mask)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_probs(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    return np.exp(log_policy_probs(logits, mask))


def sample_action(logits: np.ndarray, rng: np.random.Generator, mask: np.ndarray | None = None) -> tuple[int, float]:
    """Draw one action; returns (action, log prob under the sampling dist)."""
    probs = policy_probs(logits, mask)
    action = int(rng.choice(probs.shape[-1], p=probs))
    return action, float(np.log(probs[action]))


def masked_argmax(values: np.ndarray, mask: np.ndarray | None = None) -> int:
    v = np.asarray(values, dtype=np.float64)
    if mask is not None:
        v = np.where(np.asarray(mask) > 0, v, -np.inf)
        if not np.any(np.isfinite(v)):
            raise ContractError("no valid action to pick")
    return int(np.argmax(v))


def _stack_obs(observations, width: int) -> np.ndarray:
    flat = [np.asarray(o, dtype=np.float64).reshape(-1) for o in observations]
    if any(f.shape[0] != width for f in flat):
        raise ShapeError(f"observation width != {width}")
    return np.stack(flat, axis=0)


# ---------------------------------------------------------------------------
# DQN
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DqnConfig:
    """Epsilon schedule endpoints, discount, sync cadence, batch size."""

    epsilon_start: float = 0.99
    epsilon_end: float = 0.05
    decay_horizon: int = 10_000
    gamma: float = 0.99
    target_sync_interval: int = 500
    batch: int = 32
    huber_delta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ConfigError(
                f"need 0 <= epsilon_end <= epsilon_start <= 1, got {self.epsilon_end}/{self.epsilon_start}"
            )
        if self.decay_horizon < 1:
            raise ConfigError(f"decay_horizon must be >= 1, got {self.decay_horizon}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.target_sync_interval < 1 or self.batch < 1:
            raise ConfigError("target_sync_interval and batch must be >= 1")
        if self.huber_delta <= 0:
            raise ConfigError(f"huber_delta must be positive, got {self.huber_delta}")


def epsilon_at(step: int, cfg: DqnConfig) -> float:
    """Linear ramp from epsilon_start to epsilon_end, clamped past the horizon."""
    if step < 0:
        raise ContractError(f"step must be >= 0, got {step}")
    frac = min(1.0, step / cfg.decay_horizon)
    return (1.0 - frac) * cfg.epsilon_start + frac * cfg.epsilon_end


def sync_target(online, target) -> None:
    """Copy online parameters into the target network."""
    target.load_values(online.param_values())


def dqn_targets(
    batch: list[Transition],
    target: Mlp,
    cfg: DqnConfig,
    next_masks: np.ndarray | None = None,
) -> np.ndarray:
    """TD targets r + gamma * max_a' Q_target(x'), zero bootstrap at terminals."""
    if not batch:
        raise ContractError("dqn update needs a nonempty batch")
    next_obs = _stack_obs([t.next_observation for t in batch], target.in_width)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    next_q = target.apply(next_obs)
    if next_masks is not None:
        next_masks = np.asarray(next_masks, dtype=np.float64)
        if next_masks.shape != next_q.shape:
            raise ShapeError(f"next_masks shape {next_masks.shape} != {next_q.shape}")
        next_q = np.where(next_masks > 0, next_q, -np.inf)
    best_next = np.where(terminal, 0.0, next_q.max(axis=1))
    if not np.all(np.isfinite(best_next)):
        raise ContractError("a non-terminal next state has no valid action")
    return rewards + cfg.gamma * best_next


def dqn_loss(batch: list[Transition], online: Mlp, targets: np.ndarray, cfg: DqnConfig) -> Tensor:
    """Mean Huber penalty of Q(x, a) - target over the batch."""
    obs = _stack_obs([t.observation for t in batch], online.in_width)
    actions = np.array([t.action for t in batch], dtype=np.int64)
    if np.any(actions < 0) or np.any(actions >= online.out_width):
        raise ContractError("action index outside the online net's head")
    picked = select_last_axis(online(constant(obs)), actions)
    return reduce_mean(huber(picked - constant(targets), cfg.huber_delta))


def dqn_update(
    batch: list[Transition],
    online: Mlp,
    target: Mlp,
    cfg: DqnConfig,
    optimizer,
    next_masks: np.ndarray | None = None,
) -> dict:
    """One Huber TD step.  ``next_masks`` restricts the argmax for masked
    domains; target-net syncing stays with the caller's step counter."""
    targets = dqn_targets(batch, target, cfg, next_masks)
    loss = dqn_loss(batch, online, targets, cfg)
    for _, p in online.parameters():
        p.zero_grad()
    loss.backward()
    optimizer.step()
    return {"loss": loss.item(), "mean_target": float(targets.mean())}


# ---------------------------------------------------------------------------
# PPO
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PpoConfig:
    """Clipped-surrogate settings; epochs default to the scheduling value."""

    clip: float = 0.2
    surrogate_epochs: int = 15
    gamma: float = 0.99
    gae_lambda: float = 0.95
    value_cost: float = 0.5
    entropy_cost: float = 0.0
    normalize_advantages: bool = False

    def __post_init__(self):
        if not self.clip > 0:
            raise ConfigError(f"clip must be > 0, got {self.clip}")
        if self.surrogate_epochs < 1:
            raise ConfigError(f"surrogate_epochs must be >= 1, got {self.surrogate_epochs}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.value_cost < 0 or self.entropy_cost < 0:
            raise ConfigError("loss weights must be >= 0")


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantages for one contiguous segment.

    ``values[t]`` estimates V(x_t); ``bootstrap_value`` stands in for
    V(x_T) after the last transition (zero at a terminal).  Returns
    (advantages, value targets = advantages + values).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape or rewards.ndim != 1 or rewards.size == 0:
        raise ShapeError(f"rewards {rewards.shape} vs values {values.shape}")
    nxt = np.append(values[1:], bootstrap_value)
    deltas = rewards + gamma * nxt - values
    adv = np.empty_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * lam * running
        adv[t] = running
    return adv, adv + values


def _unpack_trajectories(batch: list[Trajectory], net: PolicyValueNet):
    """Flatten a trajectory batch, validating stored behavior log-probs."""
    if not batch:
        raise ContractError("need at least one trajectory")
    obs_parts, actions, old_logp, segments = [], [], [], []
    for traj in batch:
        obs = _stack_obs([t.observation for t in traj.transitions], net.obs_width)
        rewards = np.array([t.reward for t in traj.transitions], dtype=np.float64)
        logp = np.array([t.behavior_log_prob for t in traj.transitions], dtype=np.float64)
        if not np.all(np.isfinite(logp)):
            raise ContractError("every transition needs a finite behavior log-prob")
        obs_parts.append(obs)
        actions.extend(t.action for t in traj.transitions)
        old_logp.append(logp)
        segments.append((obs, rewards, traj.transitions[-1]))
    return obs_parts, np.array(actions, dtype=np.int64), np.concatenate(old_logp), segments


def _segment_bootstrap(net: PolicyValueNet, last: Transition) -> float:
    if last.terminal:
        return 0.0
    _, v_last = net.apply(last.next_observation.reshape(1, -1))
    return float(v_last[0])


def ppo_targets(batch: list[Trajectory], net: PolicyValueNet, cfg: PpoConfig):
    """Flattened (obs, actions, old_logp, advantages, value targets)."""
    obs_parts, actions, old_logp, segments = _unpack_trajectories(batch, net)
    adv_parts, ret_parts = [], []
    for obs, rewards, last in segments:
        _, values = net.apply(obs)
        adv, ret = gae_advantages(rewards, values, _segment_bootstrap(net, last), cfg.gamma, cfg.gae_lambda)
        adv_parts.append(adv)
        ret_parts.append(ret)
    advantages = np.concatenate(adv_parts)
    if cfg.normalize_advantages:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return np.concatenate(obs_parts, axis=0), actions, old_logp, advantages, np.concatenate(ret_parts)


def ppo_loss(
    net: PolicyValueNet,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logp: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: PpoConfig,
    masks: np.ndarray | None = None,
) -> dict[str, Tensor]:
    """Tape losses for one surrogate pass at the net's current parameters."""
    logits, values_t = net.forward(constant(obs))
    logp_all = log_softmax(mask_logits_tensor(logits, masks))
    logp = select_last_axis(logp_all, actions)
    ratio = exp(logp - constant(old_logp))
    clipped = clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip)
    surr = minimum(mul(ratio, constant(advantages)), mul(clipped, constant(advantages)))
    pg_loss = scale(reduce_mean(surr), -1.0)
    v_loss = scale(reduce_mean(square(values_t - constant(returns))), 0.5)
    neg_entropy = reduce_mean(reduce_sum(mul(exp(logp_all), logp_all), axis=-1))
    total = pg_loss + scale(v_loss, cfg.value_cost) + scale(neg_entropy, cfg.entropy_cost)
    return {"total": total, "policy": pg_loss, "value": v_loss, "neg_entropy": neg_entropy, "ratio": ratio}


def ppo_update(
    batch: list[Trajectory],
    net: PolicyValueNet,
    cfg: PpoConfig,
    optimizer,
    masks: np.ndarray | None = None,
) -> dict:
    """surrogate_epochs clipped passes over a trajectory batch.

    Advantages come from GAE(gamma, lambda) against the value head as it
    stands before the first pass; they stay frozen across epochs.  ``masks``
    rows align with the flattened batch and restrict the policy softmax.
    """
    obs, actions, old_logp, advantages, returns = ppo_targets(batch, net, cfg)
    lo, hi = 1.0 - cfg.clip, 1.0 + cfg.clip
    stats = {}
    for _ in range(cfg.surrogate_epochs):
        losses = ppo_loss(net, obs, actions, old_logp, advantages, returns, cfg, masks)
        for _, p in net.parameters():
            p.zero_grad()
        losses["total"].backward()
        optimizer.step()
        ratio = losses["ratio"].data
        stats = {
            "policy_loss": losses["policy"].item(),
            "value_loss": losses["value"].item(),
            "entropy": -losses["neg_entropy"].item(),
            "total_loss": losses["total"].item(),
            "clip_fraction": float(np.mean((ratio < lo) | (ratio > hi))),
        }
    return stats


# ---------------------------------------------------------------------------
# V-trace actor-critic
# ---------------------------------------------------------------------------


def vtrace_targets(
    batch: list[Trajectory],
    net: PolicyValueNet,
    cfg: VTraceConfig,
    masks: np.ndarray | None = None,
):
    """Flattened (obs, actions, corrected targets, pg advantages, mean ratio).

    Ratios use the current policy against stored behavior log-probs; all
    outputs are plain numbers, so no gradient flows through the correction.
    """
    obs_parts, actions, old_logp, segments = _unpack_trajectories(batch, net)
    all_obs = np.concatenate(obs_parts, axis=0)
    cur_logits, _ = net.apply(all_obs)
    cur_logp = log_policy_probs(cur_logits, masks)[np.arange(len(actions)), actions]
    ratios_all = np.exp(cur_logp - old_logp)

    target_parts, adv_parts = [], []
    offset = 0
    for obs, rewards, last in segments:
        n = len(rewards)
        _, values = net.apply(obs)
        res = compute_vtrace(
            np.append(values, _segment_bootstrap(net, last)), rewards, ratios_all[offset : offset + n], cfg
        )
        target_parts.append(res.targets)
        adv_parts.append(res.pg_advantages)
        offset += n
    return all_obs, actions, np.concatenate(target_parts), np.concatenate(adv_parts), float(ratios_all.mean())


def vtrace_loss(
    net: PolicyValueNet,
    obs: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    advantages: np.ndarray,
    cfg: VTraceConfig,
    masks: np.ndarray | None = None,
) -> dict[str, Tensor]:
    """pg + baseline_cost * value + entropy_cost * (-H) on the tape."""
    logits, values_t = net.forward(constant(obs))
    logp_all = log_softmax(mask_logits_tensor(logits, masks))
    chosen = select_last_axis(logp_all, actions)
    entropies = scale(reduce_sum(mul(exp(logp_all), logp_all), axis=-1), -1.0)
    pg = policy_loss(advantages, chosen, entropies, cfg.entropy_cost)
    v_loss = value_loss(targets, values_t)
    total = pg + scale(v_loss, cfg.baseline_cost)
    return {"total": total, "policy": pg, "value": v_loss, "entropies": entropies}


def vtrace_learner_update(
    batch: list[Trajectory],
    net: PolicyValueNet,
    cfg: VTraceConfig,
    optimizer,
    masks: np.ndarray | None = None,
) -> dict:
    """One combined update: pg + baseline_cost * value + entropy_cost * (-H)."""
    obs, actions, targets, advantages, mean_ratio = vtrace_targets(batch, net, cfg, masks)
    losses = vtrace_loss(net, obs, actions, targets, advantages, cfg, masks)
    for _, p in net.parameters():
        p.zero_grad()
    losses["total"].backward()
    optimizer.step()
    return {
        "pg_loss": losses["policy"].item(),
        "value_loss": losses["value"].item(),
        "total_loss": losses["total"].item(),
        "entropy": float(losses["entropies"].data.mean()),
        "mean_ratio": mean_ratio,
    }
