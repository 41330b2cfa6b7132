"""Sequence-policy stack: tokenization, causal model, max-entropy tuning."""

from rlforge.seq.maent import DualState, MaentConfig, default_beta, maent_losses, maent_update
from rlforge.seq.model import (
    SeqModelConfig,
    SequencePolicyModel,
    sample_window_action,
    stack_windows,
    window_action_dist,
)
from rlforge.seq.tokens import (
    ReturnQuantizer,
    TokenWindow,
    encode_window,
    patch_tiling,
    patchify,
    returns_to_go_from_rewards,
    reward_token_id,
    ternarize_reward,
    unpatchify,
)

__all__ = [
    "DualState",
    "MaentConfig",
    "ReturnQuantizer",
    "SeqModelConfig",
    "SequencePolicyModel",
    "TokenWindow",
    "default_beta",
    "encode_window",
    "maent_losses",
    "maent_update",
    "patch_tiling",
    "patchify",
    "returns_to_go_from_rewards",
    "reward_token_id",
    "sample_window_action",
    "stack_windows",
    "ternarize_reward",
    "unpatchify",
    "window_action_dist",
]
