"""Desk-scale reinforcement-learning workbench.

Subpackages:
    nn       reverse-mode tape autodiff, dense layers, optimizers, checkpoints
    envs     blockmaze bug hunt, pac-grid bug hunt, job-shop scheduling
    seq      tokenized sequence policy and entropy-constrained fine-tuning
    harness  experiment grid, statistics, reports, command line

Top-level modules:
    core     shared RL types, RNG derivation, error taxonomy
    vtrace   off-policy corrected value targets and loss builders
    learners DQN, clipped-surrogate PPO, and the v-trace learner update
    runtime  actor/learner loops, replay buffer, budgets, run directories
"""

from rlforge.core import (
    ConfigError,
    ContractError,
    DiscretePolicyDist,
    Env,
    InvalidDistributionError,
    MaskedActionError,
    NumericError,
    ShapeError,
    StepAfterDoneError,
    TapeStateError,
    Trajectory,
    Transition,
    discounted_return,
    dist_entropy,
    dist_log_prob,
    make_rng,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DiscretePolicyDist",
    "Env",
    "InvalidDistributionError",
    "MaskedActionError",
    "NumericError",
    "ShapeError",
    "StepAfterDoneError",
    "TapeStateError",
    "Trajectory",
    "Transition",
    "discounted_return",
    "dist_entropy",
    "dist_log_prob",
    "make_rng",
]

__version__ = "0.1.0"
