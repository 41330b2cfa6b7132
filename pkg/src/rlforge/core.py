"""Shared RL types, seeded RNG derivation, and the error taxonomy.

Everything stochastic in the package draws from a counter-based generator
derived from a single 64-bit experiment seed; functions that need randomness
take an explicit ``numpy.random.Generator`` handle instead of reaching for
global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


# ---------------------------------------------------------------------------
# Error taxonomy
# ---------------------------------------------------------------------------


class RlforgeError(Exception):
    """Base class for all package errors."""


class ConfigError(RlforgeError):
    """A configuration value or key is invalid."""


class ContractError(RlforgeError):
    """A call violated a documented precondition."""


class ShapeError(ContractError):
    """An array argument has the wrong shape."""


class NumericError(RlforgeError):
    """A numeric quantity is non-finite or otherwise out of domain."""


class TapeStateError(RlforgeError):
    """Backward requested without a live forward tape."""


class StepAfterDoneError(ContractError):
    """step() called on a finished episode without reset()."""


class MaskedActionError(ContractError):
    """An action was taken that the current state masks out."""


class InvalidDistributionError(RlforgeError):
    """Probabilities are negative or do not sum to one."""


# ---------------------------------------------------------------------------
# RNG derivation
# ---------------------------------------------------------------------------


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Derive an independent generator from ``seed`` and a stream path.

    Uses the counter-based Philox bit generator underneath a SeedSequence so
    that (seed, path) pairs map to reproducible, statistically independent
    streams on every platform.  ``stream`` components must be non-negative
    integers; the same path always yields the same stream.
    """
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an int, got {type(seed).__name__}")
    if any((not isinstance(s, int)) or s < 0 for s in stream):
        raise ConfigError(f"stream path must be non-negative ints, got {stream!r}")
    ss = np.random.SeedSequence(entropy=seed & 0xFFFFFFFFFFFFFFFF, spawn_key=stream)
    return np.random.Generator(np.random.Philox(seed=ss))


# ---------------------------------------------------------------------------
# Returns and distributions
# ---------------------------------------------------------------------------


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^t * rewards[t].

    gamma must lie in [0, 1]; gamma == 0 collapses to the first reward.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    total = 0.0
    scale = 1.0
    for r in rewards:
        total += scale * float(r)
        scale *= gamma
    return total


_DIST_ATOL = 1e-9


@dataclass(frozen=True)
class DiscretePolicyDist:
    """Probability vector over a discrete action set.

    Entries must be non-negative and sum to one within 1e-9.  The stored
    array is locked read-only.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidDistributionError(f"probs must be a non-empty vector, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("probs contain non-finite entries")
        if np.any(probs < 0.0):
            raise InvalidDistributionError(f"negative probability: min={probs.min()}")
        total = float(probs.sum())
        if abs(total - 1.0) > _DIST_ATOL:
            raise InvalidDistributionError(f"probs sum to {total!r}, not 1")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def action_count(self) -> int:
        return self.probs.size

    def entropy(self) -> float:
        """Shannon entropy in nats; zero-probability terms contribute zero."""
        p = self.probs[self.probs > 0.0]
        return float(-(p * np.log(p)).sum())

    def log_prob(self, action: int) -> float:
        """Natural log of the probability of ``action``; -inf on zero mass."""
        if not 0 <= action < self.probs.size:
            raise ContractError(f"action {action} out of range 0..{self.probs.size - 1}")
        p = self.probs[action]
        return float(np.log(p)) if p > 0.0 else -math.inf

    def sample(self, rng: np.random.Generator) -> int:
        """Multinomial draw using the explicit generator handle."""
        return int(rng.choice(self.probs.size, p=self.probs))


def dist_entropy(dist: DiscretePolicyDist) -> float:
    return dist.entropy()


def dist_log_prob(dist: DiscretePolicyDist, action: int) -> float:
    return dist.log_prob(action)


def uniform_dist(action_count: int) -> DiscretePolicyDist:
    return DiscretePolicyDist(np.full(action_count, 1.0 / action_count))


# ---------------------------------------------------------------------------
# Transitions and trajectories
# ---------------------------------------------------------------------------


def _freeze_obs(obs) -> np.ndarray:
    arr = np.array(obs, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Transition:
    """One environment step as seen by the behavior policy.

    ``behavior_log_prob`` is the log-probability the acting policy assigned
    to ``action`` at collection time; it must be <= 0 (within distribution
    tolerance) and is required for any off-policy correction downstream.
    """

    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    terminal: bool
    behavior_log_prob: float

    def __post_init__(self):
        object.__setattr__(self, "observation", _freeze_obs(self.observation))
        object.__setattr__(self, "next_observation", _freeze_obs(self.next_observation))
        if not isinstance(self.action, (int, np.integer)) or isinstance(self.action, bool):
            raise ContractError(f"action must be an int, got {self.action!r}")
        object.__setattr__(self, "action", int(self.action))
        object.__setattr__(self, "reward", float(self.reward))
        object.__setattr__(self, "terminal", bool(self.terminal))
        lp = float(self.behavior_log_prob)
        if not (lp <= _DIST_ATOL or math.isinf(lp) and lp < 0):
            raise ContractError(f"behavior_log_prob must be <= 0, got {lp!r}")
        object.__setattr__(self, "behavior_log_prob", min(lp, 0.0))


@dataclass(frozen=True)
class Trajectory:
    """A contiguous run of transitions from one episode.

    At most the final transition may be terminal.  ``episode_return`` is the
    undiscounted reward sum and ``length`` the transition count; both are
    derived at construction and kept consistent by freezing.
    """

    transitions: tuple[Transition, ...]
    episode_return: float = field(default=math.nan)
    length: int = field(default=-1)

    def __post_init__(self):
        transitions = tuple(self.transitions)
        if not transitions:
            raise ContractError("a trajectory needs at least one transition")
        if any(t.terminal for t in transitions[:-1]):
            raise ContractError("terminal transition before the end of a trajectory")
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "episode_return", float(sum(t.reward for t in transitions)))
        object.__setattr__(self, "length", len(transitions))

    @property
    def terminal(self) -> bool:
        return self.transitions[-1].terminal

    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions], dtype=np.float64)

    def actions(self) -> np.ndarray:
        return np.array([t.action for t in self.transitions], dtype=np.int64)


# ---------------------------------------------------------------------------
# Environment contract
# ---------------------------------------------------------------------------


class Env:
    """Episodic environment with a discrete action set.

    Subclasses set ``action_count`` and ``observation_shape`` and implement
    ``reset``/``step``.  ``step`` on a finished episode must raise
    StepAfterDoneError; implementations get that for free by calling
    ``self._require_live()`` first and maintaining ``self._done``.
    """

    action_count: int
    observation_shape: tuple[int, ...]

    def __init__(self):
        self._done = True

    def reset(self, seed: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: int):
        """Apply ``action``; returns (observation, reward, done, info)."""
        raise NotImplementedError

    def valid_actions(self) -> np.ndarray:
        """Boolean mask of currently legal actions; all-true by default."""
        return np.ones(self.action_count, dtype=bool)

    def _require_live(self):
        if self._done:
            raise StepAfterDoneError("step() after terminal; call reset() first")

    def _require_action(self, action: int):
        if not 0 <= action < self.action_count:
            raise ContractError(f"action {action} out of range 0..{self.action_count - 1}")
