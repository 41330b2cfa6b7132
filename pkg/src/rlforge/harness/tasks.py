"""Task wiring: environments, budgets, quantizer ranges, eval protocols."""

from dataclasses import dataclass

import numpy as np

from ..core import ConfigError
from ..envs.blockmaze import BlockmazeEnv, default_maze_spec, generate_maze_layout, inject_bugs
from ..envs.jssp import JsspEnv, generate_taillard, initial_state, lower_bound
from ..envs.pacgrid import PacGridEnv, default_pacgrid_spec
from ..seq.tokens import ReturnQuantizer
from .config import TASK_NAMES


class ReseedingEnv:
    """Draws a fresh reset seed per episode from a deterministic stream.

    Used for generator-backed environments whose bare reset() would replay
    the same instance forever.
    """

    def __init__(self, inner, base_seed: int):
        self._inner = inner
        self._base = int(base_seed)
        self._count = 0
        self.action_count = inner.action_count
        self.observation_shape = inner.observation_shape

    def reset(self, seed=None):
        if seed is None:
            seed = self._base + self._count
            self._count += 1
        return self._inner.reset(seed=seed)

    def step(self, action):
        return self._inner.step(action)

    def valid_actions(self):
        return self._inner.valid_actions()


class FamilyEnv:
    """One seeded variant per episode, cycling a small cached pool."""

    def __init__(self, builder, base_seed: int, pool: int = 8):
        if pool < 1:
            raise ConfigError(f"pool must be >= 1, got {pool}")
        self._builder = builder
        self._base = int(base_seed)
        self._pool: list = [None] * pool
        self._count = 0
        first = self._variant(0)
        self.action_count = first.action_count
        self.observation_shape = first.observation_shape
        self._current = first

    def _variant(self, idx: int):
        slot = idx % len(self._pool)
        if self._pool[slot] is None:
            self._pool[slot] = self._builder(self._base + slot)
        return self._pool[slot]

    def reset(self, seed=None):
        self._current = self._variant(self._count)
        self._count += 1
        return self._current.reset(seed=seed)

    def step(self, action):
        return self._current.step(action)

    def valid_actions(self):
        return self._current.valid_actions()


@dataclass(frozen=True)
class TaskSpec:
    """Everything the protocol needs to know about one benchmark task."""

    name: str
    budget_kind: str  # denomination of the fine-tuning data budget
    specialist_budget: float  # the baseline's full training budget
    eval_kind: str  # steps | episodes | instances
    eval_amount: int
    return_range: tuple[float, float]
    patch_count: int
    masked: bool
    env_seed: int = 0

    def quantizer(self, bins: int = 64) -> ReturnQuantizer:
        return ReturnQuantizer(self.return_range[0], self.return_range[1], bins)


def make_task(name: str, env_seed: int = 0) -> TaskSpec:
    if name == "blockmaze":
        return TaskSpec(
            name, "seconds", 43_200.0, "steps", 300_000,
            (-400.0, 100.0), patch_count=16, masked=False, env_seed=env_seed,
        )
    if name == "pacgrid":
        spec = default_pacgrid_spec()
        top = float(spec.dot_count + 200)  # every dot plus all four gate bounties
        return TaskSpec(
            name, "episodes", 1000.0, "episodes", 1000,
            (0.0, top), patch_count=3, masked=False, env_seed=env_seed,
        )
    if name in ("jssp6x6", "jssp30x20"):
        jobs, machines = (6, 6) if name == "jssp6x6" else (30, 20)
        specialist = 36_000.0 if name == "jssp6x6" else 6_000_000.0
        inst = generate_taillard(jobs, machines, 1, 99, seed=env_seed)
        h0 = float(lower_bound(initial_state(inst)))
        return TaskSpec(
            name, "steps", specialist, "instances", 100,
            (-h0, 0.0), patch_count=6, masked=True, env_seed=env_seed,
        )
    raise ConfigError(f"unknown task {name!r}; pick from {TASK_NAMES}")


def _jssp_generator(task: TaskSpec) -> tuple[int, int, int, int]:
    jobs, machines = (6, 6) if task.name == "jssp6x6" else (30, 20)
    return (jobs, machines, 1, 99)


def train_env(task: TaskSpec):
    """The fine-tuning environment (fresh instance)."""
    if task.name == "blockmaze":
        return BlockmazeEnv(default_maze_spec())
    if task.name == "pacgrid":
        return PacGridEnv(default_pacgrid_spec(ghost_policy_seed=task.env_seed), rearm_gates_on_reset=True)
    return ReseedingEnv(JsspEnv(generator=_jssp_generator(task)), base_seed=task.env_seed * 100_003)


def eval_env(task: TaskSpec):
    """The evaluation environment; JSSP variants take per-instance reset seeds."""
    if task.name == "blockmaze":
        return BlockmazeEnv(default_maze_spec())
    if task.name == "pacgrid":
        return PacGridEnv(default_pacgrid_spec(ghost_policy_seed=task.env_seed), rearm_gates_on_reset=True)
    return JsspEnv(generator=_jssp_generator(task))


def pretrain_env(task: TaskSpec, variant_seed: int):
    """One member of the seeded pre-training family."""
    if task.name == "blockmaze":
        layout = generate_maze_layout(20, 20, seed=variant_seed)
        return BlockmazeEnv(inject_bugs(layout, seed=variant_seed))
    if task.name == "pacgrid":
        return PacGridEnv(default_pacgrid_spec(ghost_policy_seed=variant_seed), rearm_gates_on_reset=True)
    return ReseedingEnv(JsspEnv(generator=_jssp_generator(task)), base_seed=variant_seed * 99_991)


def pretrain_family(task: TaskSpec, base_seed: int) -> FamilyEnv:
    return FamilyEnv(lambda s: pretrain_env(task, s), base_seed)


def mask_fn(task: TaskSpec):
    """Per-observation valid-action mask, or None when all actions are legal."""
    if not task.masked:
        return None
    jobs = 6 if task.name == "jssp6x6" else 30

    def fn(obs: np.ndarray) -> np.ndarray:
        from ..envs.jssp import observation_mask

        return observation_mask(np.asarray(obs), jobs)

    return fn
