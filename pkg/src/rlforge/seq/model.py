"""A small causal transformer over tokenized trajectory windows.

Per timestep the input carries M patch embeddings plus return, action, and
reward tokens; action logits (and the value estimate) are read at the
return-token slot, so predicting a_t conditions on x_t and R_t but never on
the same step's action or reward.  The action head starts at exactly zero,
which makes the untrained policy uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, ContractError, DiscretePolicyDist, ShapeError
from rlforge.nn.layers import Dense, init_uniform_fan_in
from rlforge.nn.tape import (
    Tensor,
    add,
    concat,
    constant,
    gather_rows,
    layer_norm,
    log_softmax,
    matmul,
    reshape,
    scale,
    softmax,
    swapaxes,
    take_axis,
    tanh,
)
from rlforge.seq.tokens import TokenWindow

REWARD_VOCAB = 3  # {-1, 0, +1} shifted to table ids {0, 1, 2}


@dataclass(frozen=True)
class SeqModelConfig:
    """Architecture knobs; defaults are the desk-scale model."""

    action_count: int
    patch_count: int
    patch_dim: int
    return_bins: int = 64
    context: int = 4
    blocks: int = 2
    heads: int = 4
    embed: int = 64

    def __post_init__(self):
        for name in ("action_count", "patch_count", "patch_dim", "return_bins", "context", "blocks", "heads", "embed"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.return_bins < 2:
            raise ConfigError("return_bins must be >= 2")
        if self.embed % self.heads != 0:
            raise ConfigError(f"embed {self.embed} not divisible by heads {self.heads}")

    @property
    def tokens_per_step(self) -> int:
        return self.patch_count + 3

    @property
    def seq_len(self) -> int:
        return self.context * self.tokens_per_step

    @property
    def return_slots(self) -> np.ndarray:
        """Token indices holding R_t, one per timestep."""
        return np.arange(self.context) * self.tokens_per_step + self.patch_count


def stack_windows(windows: list[TokenWindow]):
    """Batch TokenWindows into (patches, returns, actions, rewards, mask)."""
    if not windows:
        raise ContractError("need at least one window")
    k = windows[0].context
    if any(w.context != k for w in windows):
        raise ShapeError("windows disagree on context length")
    return (
        np.stack([w.patches for w in windows]),
        np.stack([w.returns for w in windows]),
        np.stack([w.actions for w in windows]),
        np.stack([w.rewards for w in windows]),
        np.stack([w.mask for w in windows]),
    )


class _Block:
    """Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, cfg: SeqModelConfig, rng: np.random.Generator, name: str):
        e = cfg.embed
        self.cfg = cfg
        self.name = name
        self.ln1_g = Tensor(np.ones(e), requires_grad=True, name=f"{name}.ln1.g")
        self.ln1_b = Tensor(np.zeros(e), requires_grad=True, name=f"{name}.ln1.b")
        self.wq = Dense(e, e, rng, name=f"{name}.wq")
        self.wk = Dense(e, e, rng, name=f"{name}.wk")
        self.wv = Dense(e, e, rng, name=f"{name}.wv")
        self.wo = Dense(e, e, rng, name=f"{name}.wo")
        self.ln2_g = Tensor(np.ones(e), requires_grad=True, name=f"{name}.ln2.g")
        self.ln2_b = Tensor(np.zeros(e), requires_grad=True, name=f"{name}.ln2.b")
        self.ffn_in = Dense(e, 4 * e, rng, name=f"{name}.ffn_in")
        self.ffn_out = Dense(4 * e, e, rng, name=f"{name}.ffn_out")

    def __call__(self, x: Tensor, causal_bias: np.ndarray) -> Tensor:
        cfg = self.cfg
        b, t, e = x.shape
        dh = e // cfg.heads

        h = layer_norm(x, self.ln1_g, self.ln1_b)
        def split(z):
            return swapaxes(reshape(z, (b, t, cfg.heads, dh)), 1, 2)
        q, k, v = split(self.wq(h)), split(self.wk(h)), split(self.wv(h))
        scores = scale(matmul(q, swapaxes(k, 2, 3)), 1.0 / math.sqrt(dh))
        att = softmax(add(scores, constant(causal_bias)), axis=-1)
        mixed = reshape(swapaxes(matmul(att, v), 1, 2), (b, t, e))
        x = add(x, self.wo(mixed))

        h = layer_norm(x, self.ln2_g, self.ln2_b)
        return add(x, self.ffn_out(tanh(self.ffn_in(h))))

    def parameters(self):
        out = [(self.ln1_g.name, self.ln1_g), (self.ln1_b.name, self.ln1_b)]
        for layer in (self.wq, self.wk, self.wv, self.wo):
            out.extend(layer.parameters())
        out.extend([(self.ln2_g.name, self.ln2_g), (self.ln2_b.name, self.ln2_b)])
        out.extend(self.ffn_in.parameters())
        out.extend(self.ffn_out.parameters())
        return out


class SequencePolicyModel:
    """Tokenized-trajectory policy with action and value heads."""

    def __init__(self, cfg: SeqModelConfig, rng: np.random.Generator, name: str = "seq"):
        self.cfg = cfg
        self.name = name
        e = cfg.embed
        self.patch_proj = Dense(cfg.patch_dim, e, rng, name=f"{name}.patch")
        self.ret_table = Tensor(init_uniform_fan_in(rng, e, (cfg.return_bins, e)), requires_grad=True, name=f"{name}.ret_table")
        self.act_table = Tensor(init_uniform_fan_in(rng, e, (cfg.action_count, e)), requires_grad=True, name=f"{name}.act_table")
        self.rew_table = Tensor(init_uniform_fan_in(rng, e, (REWARD_VOCAB, e)), requires_grad=True, name=f"{name}.rew_table")
        self.pos_table = Tensor(init_uniform_fan_in(rng, e, (cfg.seq_len, e)), requires_grad=True, name=f"{name}.pos_table")
        self.blocks = [_Block(cfg, rng, name=f"{name}.block{i}") for i in range(cfg.blocks)]
        self.lnf_g = Tensor(np.ones(e), requires_grad=True, name=f"{name}.lnf.g")
        self.lnf_b = Tensor(np.zeros(e), requires_grad=True, name=f"{name}.lnf.b")
        self.action_head = Dense(e, cfg.action_count, rng, name=f"{name}.act_head")
        self.action_head.w.data = np.zeros_like(self.action_head.w.data)  # uniform at init
        self.action_head.b.data = np.zeros_like(self.action_head.b.data)
        self.value_head = Dense(e, 1, rng, name=f"{name}.val_head")
        self.value_head.w.data = np.zeros_like(self.value_head.w.data)
        self.value_head.b.data = np.zeros_like(self.value_head.b.data)
        bias = np.zeros((cfg.seq_len, cfg.seq_len))
        bias[np.triu_indices(cfg.seq_len, k=1)] = -1e9
        self._causal_bias = bias

    def forward(self, patches, returns, actions, rewards) -> tuple[Tensor, Tensor]:
        """Tape forward over stacked windows -> (action logits (B, K, A),
        values (B, K)), both read at the return-token slots."""
        cfg = self.cfg
        patches = np.asarray(patches, dtype=np.float64)
        returns = np.asarray(returns, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        rewards = np.asarray(rewards, dtype=np.int64)
        if patches.ndim != 4 or patches.shape[1:] != (cfg.context, cfg.patch_count, cfg.patch_dim):
            raise ContractError(
                f"patches shape {patches.shape} != (B, {cfg.context}, {cfg.patch_count}, {cfg.patch_dim})"
            )
        b = patches.shape[0]
        for name, arr in (("returns", returns), ("actions", actions), ("rewards", rewards)):
            if arr.shape != (b, cfg.context):
                raise ContractError(f"{name} shape {arr.shape} != ({b}, {cfg.context})")

        p = self.patch_proj(constant(patches.reshape(b, cfg.context * cfg.patch_count, cfg.patch_dim)))
        p = reshape(p, (b, cfg.context, cfg.patch_count, cfg.embed))
        r = reshape(gather_rows(self.ret_table, returns), (b, cfg.context, 1, cfg.embed))
        a = reshape(gather_rows(self.act_table, actions), (b, cfg.context, 1, cfg.embed))
        w = reshape(gather_rows(self.rew_table, rewards), (b, cfg.context, 1, cfg.embed))
        x = reshape(concat([p, r, a, w], axis=2), (b, cfg.seq_len, cfg.embed))
        x = add(x, self.pos_table)
        for block in self.blocks:
            x = block(x, self._causal_bias)
        x = layer_norm(x, self.lnf_g, self.lnf_b)
        slots = take_axis(x, cfg.return_slots, axis=1)
        logits = self.action_head(slots)
        values = reshape(self.value_head(slots), (b, cfg.context))
        return logits, values

    def apply(self, patches, returns, actions, rewards) -> tuple[np.ndarray, np.ndarray]:
        """Gradient-free forward; identical arithmetic to ``forward``."""
        logits, values = self.forward(patches, returns, actions, rewards)
        return logits.data, values.data

    def log_probs(self, patches, returns, actions, rewards) -> Tensor:
        logits, _ = self.forward(patches, returns, actions, rewards)
        return log_softmax(logits)

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = self.patch_proj.parameters()
        out.extend([
            (self.ret_table.name, self.ret_table),
            (self.act_table.name, self.act_table),
            (self.rew_table.name, self.rew_table),
            (self.pos_table.name, self.pos_table),
        ])
        for block in self.blocks:
            out.extend(block.parameters())
        out.extend([(self.lnf_g.name, self.lnf_g), (self.lnf_b.name, self.lnf_b)])
        out.extend(self.action_head.parameters())
        out.extend(self.value_head.parameters())
        return out

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

    def param_count(self) -> int:
        return sum(t.data.size for _, t in self.parameters())


def window_action_dist(
    model: SequencePolicyModel,
    window: TokenWindow,
    temperature: float = 1.0,
    mask: np.ndarray | None = None,
) -> DiscretePolicyDist:
    """Action distribution at the window's final (current) timestep."""
    cfg = model.cfg
    if window.context != cfg.context:
        raise ContractError(f"window context {window.context} != model context {cfg.context}")
    if temperature < 0:
        raise ConfigError(f"temperature must be >= 0, got {temperature}")
    logits, _ = model.apply(window.patches[None], window.returns[None], window.actions[None], window.rewards[None])
    z = logits[0, -1].astype(np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != z.shape:
            raise ShapeError(f"mask shape {mask.shape} != ({cfg.action_count},)")
        if not mask.sum() >= 1.0:
            raise ContractError("no valid action under the mask")
        z = np.where(mask > 0, z, -np.inf)
    if temperature == 0.0:
        probs = np.zeros_like(z)
        probs[int(np.argmax(z))] = 1.0
        return DiscretePolicyDist(probs)
    z = z / temperature
    z = z - z[np.isfinite(z)].max()
    e = np.where(np.isfinite(z), np.exp(z), 0.0)
    return DiscretePolicyDist(e / e.sum())


def sample_window_action(
    model: SequencePolicyModel,
    window: TokenWindow,
    rng: np.random.Generator,
    temperature: float = 1.0,
    mask: np.ndarray | None = None,
) -> tuple[int, DiscretePolicyDist]:
    """Draw the next action; returns (action, full distribution)."""
    dist = window_action_dist(model, window, temperature, mask)
    return dist.sample(rng), dist
