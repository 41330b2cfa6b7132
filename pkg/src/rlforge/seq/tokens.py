"""Trajectory tokenization: ternary rewards, quantized returns, observation
patches, and fixed-length context windows.

Per timestep the token layout is ``<patch_1 .. patch_M, R_t, a_t, r_t>``:
M continuous patch embeddings followed by the discrete return, action, and
reward tokens.  Windows hold the last K timesteps, left-padded so the most
recent step always sits at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rlforge.core import ConfigError, ContractError, ShapeError


def ternarize_reward(r: float) -> int:
    """Sign token in {-1, 0, +1}; exact zero maps to 0."""
    r = float(r)
    if not math.isfinite(r):
        raise ContractError(f"reward must be finite, got {r!r}")
    return 0 if r == 0.0 else (1 if r > 0.0 else -1)


@dataclass(frozen=True)
class ReturnQuantizer:
    """Uniform binning of returns-to-go over a closed range.

    Values are clamped into [r_min, r_max] before binning; dequantize
    yields the bin midpoint, so the round-trip error of any in-range
    value is at most half a bin width.
    """

    r_min: float
    r_max: float
    bins: int = 64

    def __post_init__(self):
        if not (math.isfinite(self.r_min) and math.isfinite(self.r_max)):
            raise ConfigError("quantizer range must be finite")
        if self.r_min >= self.r_max:
            raise ConfigError(f"need r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if self.bins < 2:
            raise ConfigError(f"need at least 2 bins, got {self.bins}")

    @property
    def bin_width(self) -> float:
        return (self.r_max - self.r_min) / self.bins

    def quantize(self, value: float) -> int:
        value = float(value)
        if math.isnan(value):
            raise ContractError("cannot quantize nan")
        clamped = min(max(value, self.r_min), self.r_max)
        idx = int((clamped - self.r_min) / self.bin_width)
        return min(idx, self.bins - 1)

    def dequantize(self, token: int) -> float:
        token = int(token)
        if not 0 <= token < self.bins:
            raise ContractError(f"return token {token} outside [0, {self.bins})")
        return self.r_min + (token + 0.5) * self.bin_width


def reward_token_id(r: float) -> int:
    """Embedding-table id for a scalar reward: {-1, 0, +1} -> {0, 1, 2}."""
    return ternarize_reward(r) + 1


# ---------------------------------------------------------------------------
# Patch tiling
# ---------------------------------------------------------------------------


def patch_tiling(grid_shape: tuple[int, int], patch_count: int) -> tuple[int, int]:
    """Factor ``patch_count`` into a (rows, cols) tiling of the grid.

    Among factor pairs that divide the grid evenly, the most nearly square
    one wins (ties to the flatter-than-tall option).
    """
    rows, cols = int(grid_shape[0]), int(grid_shape[1])
    if patch_count < 1:
        raise ConfigError(f"patch_count must be >= 1, got {patch_count}")
    candidates = [
        (a, patch_count // a)
        for a in range(1, patch_count + 1)
        if patch_count % a == 0 and rows % a == 0 and cols % (patch_count // a) == 0
    ]
    if not candidates:
        raise ShapeError(f"no {patch_count}-patch tiling divides a {rows}x{cols} grid")
    return min(candidates, key=lambda ab: (abs(ab[0] - ab[1]), ab[0]))


def patchify(grid: np.ndarray, patch_count: int) -> np.ndarray:
    """Split a 2-D grid into ``patch_count`` flattened patches, row-major."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ShapeError(f"patchify needs a 2-D grid, got shape {grid.shape}")
    tr, tc = patch_tiling(grid.shape, patch_count)
    ph, pw = grid.shape[0] // tr, grid.shape[1] // tc
    patches = grid.reshape(tr, ph, tc, pw).swapaxes(1, 2).reshape(patch_count, ph * pw)
    return patches


def unpatchify(patches: np.ndarray, grid_shape: tuple[int, int]) -> np.ndarray:
    """Inverse of patchify for the same grid shape and patch count."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2:
        raise ShapeError(f"unpatchify needs (patches, cells), got {patches.shape}")
    rows, cols = grid_shape
    tr, tc = patch_tiling(grid_shape, patches.shape[0])
    ph, pw = rows // tr, cols // tc
    if patches.shape[1] != ph * pw:
        raise ShapeError(f"patch width {patches.shape[1]} != {ph}x{pw}")
    return patches.reshape(tr, tc, ph, pw).swapaxes(1, 2).reshape(rows, cols)


# ---------------------------------------------------------------------------
# Context windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenWindow:
    """K timesteps of tokens, left-padded; ``mask`` flags the real steps."""

    patches: np.ndarray  # (K, M, P) float patch contents
    returns: np.ndarray  # (K,) int return tokens
    actions: np.ndarray  # (K,) int action tokens
    rewards: np.ndarray  # (K,) int reward-table ids in {0, 1, 2}
    mask: np.ndarray     # (K,) 1.0 where the step is real

    def __post_init__(self):
        patches = np.asarray(self.patches, dtype=np.float64)
        returns = np.asarray(self.returns, dtype=np.int64)
        actions = np.asarray(self.actions, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=np.int64)
        mask = np.asarray(self.mask, dtype=np.float64)
        k = patches.shape[0]
        if patches.ndim != 3:
            raise ShapeError(f"patches must be (K, M, P), got {patches.shape}")
        for name, arr in (("returns", returns), ("actions", actions), ("rewards", rewards), ("mask", mask)):
            if arr.shape != (k,):
                raise ShapeError(f"{name} shape {arr.shape} != ({k},)")
        if np.any((rewards < 0) | (rewards > 2)):
            raise ContractError("reward ids must lie in {0, 1, 2}")
        if np.any((returns < 0) | (actions < 0)):
            raise ContractError("token ids must be non-negative")
        if not set(np.unique(mask)) <= {0.0, 1.0}:
            raise ContractError("mask entries must be 0 or 1")
        if np.any(np.diff(mask) < 0):
            raise ContractError("padding must sit on the left of the window")
        for arr in (patches, returns, actions, rewards, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "patches", patches)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "mask", mask)

    @property
    def context(self) -> int:
        return self.patches.shape[0]

    @property
    def steps(self) -> int:
        return int(self.mask.sum())


def encode_window(
    observations,
    returns_to_go,
    actions,
    rewards,
    context: int,
    quantizer: ReturnQuantizer,
    patch_count: int,
) -> TokenWindow:
    """Tokenize the last ``context`` steps of a trajectory prefix.

    Inputs are aligned sequences (any length >= 1); only the trailing
    ``context`` entries are encoded, shorter prefixes are left-padded.
    """
    n = len(observations)
    if not (n == len(returns_to_go) == len(actions) == len(rewards)):
        raise ShapeError("observation/return/action/reward sequences must align")
    if n == 0:
        raise ContractError("cannot encode an empty prefix")
    if context < 1:
        raise ConfigError(f"context must be >= 1, got {context}")
    take = min(n, context)
    pad = context - take
    obs_tail = observations[n - take :]
    patch_rows = [patchify(o, patch_count) for o in obs_tail]
    patch_dim = patch_rows[0].shape[1]

    patches = np.zeros((context, patch_count, patch_dim))
    returns = np.zeros(context, dtype=np.int64)
    acts = np.zeros(context, dtype=np.int64)
    rews = np.ones(context, dtype=np.int64)  # pad with the zero-reward id
    mask = np.zeros(context)
    for i in range(take):
        patches[pad + i] = patch_rows[i]
        returns[pad + i] = quantizer.quantize(returns_to_go[n - take + i])
        acts[pad + i] = int(actions[n - take + i])
        rews[pad + i] = reward_token_id(rewards[n - take + i])
        mask[pad + i] = 1.0
    return TokenWindow(patches, returns, acts, rews, mask)


def returns_to_go_from_rewards(rewards) -> np.ndarray:
    """Undiscounted suffix sums: rtg[t] = sum of rewards from t onward."""
    arr = np.asarray(rewards, dtype=np.float64)
    return arr[::-1].cumsum()[::-1].copy()
