"""Job-shop scheduling as an episodic dispatching environment.

A state is a partial schedule built by appending one operation at a time:
dispatching job ``a`` schedules that job's next unscheduled operation at
``max(job ready, machine available)``.  Rewards are the negated increase of
the makespan lower bound H(s) = max over operations of their completion-time
bound, so episode returns telescope to H(s0) - C_max exactly.  All schedule
arithmetic is plain integers.

The lower bound C_LB propagates along job chains only: a scheduled operation
contributes its actual completion time, and each unscheduled operation adds
its processing time to its job predecessor's bound (machine availability is
deliberately excluded).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from rlforge.core import (
    ConfigError,
    ContractError,
    Env,
    MaskedActionError,
    StepAfterDoneError,
    make_rng,
)

BRUTE_FORCE_MAX_OPS = 12

PDR_RULES = ("SPT", "LPT", "MWR", "FIFO")


@dataclass(frozen=True)
class JsspInstance:
    """``ops[i][j] = (machine, time)`` for operation j of job i."""

    ops: tuple[tuple[tuple[int, int], ...], ...]
    machines: int

    def __post_init__(self):
        ops = tuple(tuple((int(m), int(t)) for m, t in job) for job in self.ops)
        if not ops or any(not job for job in ops):
            raise ConfigError("instance needs at least one job with one operation")
        for i, job in enumerate(ops):
            for j, (m, t) in enumerate(job):
                if not 0 <= m < self.machines:
                    raise ConfigError(f"job {i} op {j}: machine {m} out of range 0..{self.machines - 1}")
                if t < 1:
                    raise ConfigError(f"job {i} op {j}: processing time {t} < 1")
        object.__setattr__(self, "ops", ops)

    @property
    def jobs(self) -> int:
        return len(self.ops)

    @property
    def total_ops(self) -> int:
        return sum(len(job) for job in self.ops)

    def job_work(self, i: int) -> int:
        return sum(t for _, t in self.ops[i])


def generate_taillard(jobs: int, machines: int, time_low: int, time_high: int, seed: int) -> JsspInstance:
    """Random instance in the classic style: each job visits every machine
    once in a uniformly random order; integer times uniform on
    [time_low, time_high]."""
    if jobs < 1 or machines < 1:
        raise ConfigError(f"need jobs >= 1 and machines >= 1, got {jobs}x{machines}")
    if not 1 <= time_low <= time_high:
        raise ConfigError(f"need 1 <= time_low <= time_high, got [{time_low}, {time_high}]")
    rng = make_rng(seed, 9101)
    ops = []
    for _ in range(jobs):
        order = rng.permutation(machines)
        times = rng.integers(time_low, time_high + 1, size=machines)
        ops.append(tuple((int(m), int(t)) for m, t in zip(order, times)))
    return JsspInstance(tuple(ops), machines)


# ---------------------------------------------------------------------------
# Instance text format: first line "J M", then J lines of M "machine time" pairs
# ---------------------------------------------------------------------------


def format_instance(instance: JsspInstance) -> str:
    lines = [f"{instance.jobs} {instance.machines}"]
    for job in instance.ops:
        lines.append(" ".join(f"{m} {t}" for m, t in job))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> JsspInstance:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigError("empty instance text")
    head = lines[0].split()
    if len(head) != 2:
        raise ConfigError(f"first line must be 'J M', got {lines[0]!r}")
    jobs, machines = int(head[0]), int(head[1])
    if len(lines) != jobs + 1:
        raise ConfigError(f"expected {jobs} job lines, found {len(lines) - 1}")
    ops = []
    for i, line in enumerate(lines[1:]):
        fields = line.split()
        if len(fields) % 2 != 0:
            raise ConfigError(f"job {i}: odd field count")
        pairs = tuple((int(fields[k]), int(fields[k + 1])) for k in range(0, len(fields), 2))
        ops.append(pairs)
    return JsspInstance(tuple(ops), machines)


def save_instance(path: str, instance: JsspInstance) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_instance(instance))


def load_instance(path: str) -> JsspInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------------------
# Partial schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleState:
    """Immutable partial schedule under append dispatch semantics."""

    instance: JsspInstance
    next_op: tuple[int, ...]                      # per job: index of next unscheduled op
    job_ready: tuple[int, ...]                    # completion time of each job's latest op
    machine_ready: tuple[int, ...]                # per machine: time it frees up
    start_times: tuple[tuple[int, ...], ...]      # -1 where unscheduled
    machine_sequences: tuple[tuple[tuple[int, int], ...], ...]  # dispatch order per machine

    @property
    def done(self) -> bool:
        return all(n == len(job) for n, job in zip(self.next_op, self.instance.ops))

    def scheduled_count(self) -> int:
        return sum(self.next_op)

    def eligible_jobs(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.next_op) if n < len(self.instance.ops[i]))

    def oriented_arcs(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        """Machine-order precedence pairs induced by the dispatch sequence."""
        arcs = []
        for seq in self.machine_sequences:
            for a, b in itertools.combinations(seq, 2):
                arcs.append((a, b))
        return tuple(arcs)


def initial_state(instance: JsspInstance) -> ScheduleState:
    return ScheduleState(
        instance=instance,
        next_op=(0,) * instance.jobs,
        job_ready=(0,) * instance.jobs,
        machine_ready=(0,) * instance.machines,
        start_times=tuple((-1,) * len(job) for job in instance.ops),
        machine_sequences=((),) * instance.machines,
    )


def lower_bound(state: ScheduleState) -> int:
    """H(s): max completion-time bound, pure job-chain propagation."""
    best = 0
    for i, job in enumerate(state.instance.ops):
        chain = state.job_ready[i]
        for j in range(state.next_op[i], len(job)):
            chain += job[j][1]
        if chain > best:
            best = chain
    return best


def clb_matrix(state: ScheduleState) -> np.ndarray:
    """Per-operation completion bounds, shape (jobs, max ops per job)."""
    width = max(len(job) for job in state.instance.ops)
    out = np.zeros((state.instance.jobs, width), dtype=np.int64)
    for i, job in enumerate(state.instance.ops):
        for j in range(state.next_op[i]):
            out[i, j] = state.start_times[i][j] + job[j][1]
        chain = state.job_ready[i]
        for j in range(state.next_op[i], len(job)):
            chain += job[j][1]
            out[i, j] = chain
    return out


def dispatch(state: ScheduleState, job: int) -> tuple[ScheduleState, int, bool]:
    """Schedule ``job``'s next operation; returns (state', reward, done).

    reward = H(s) - H(s') <= 0, integer.  Dispatching a completed job raises
    MaskedActionError; dispatching a finished schedule raises
    StepAfterDoneError.
    """
    inst = state.instance
    if state.done:
        raise StepAfterDoneError("schedule already complete")
    if not 0 <= job < inst.jobs:
        raise ContractError(f"job {job} out of range 0..{inst.jobs - 1}")
    j = state.next_op[job]
    if j >= len(inst.ops[job]):
        raise MaskedActionError(f"job {job} has no unscheduled operations")

    machine, time = inst.ops[job][j]
    start = max(state.job_ready[job], state.machine_ready[machine])
    finish = start + time

    next_op = tuple(n + 1 if i == job else n for i, n in enumerate(state.next_op))
    job_ready = tuple(finish if i == job else r for i, r in enumerate(state.job_ready))
    machine_ready = tuple(finish if m == machine else r for m, r in enumerate(state.machine_ready))
    start_times = tuple(
        tuple(start if (i == job and k == j) else s for k, s in enumerate(row)) if i == job else row
        for i, row in enumerate(state.start_times)
    )
    machine_sequences = tuple(
        seq + ((job, j),) if m == machine else seq for m, seq in enumerate(state.machine_sequences)
    )
    new_state = ScheduleState(inst, next_op, job_ready, machine_ready, start_times, machine_sequences)
    reward = lower_bound(state) - lower_bound(new_state)
    return new_state, reward, new_state.done


@dataclass(frozen=True)
class ScheduleResult:
    """Complete schedule: start times per operation plus the makespan."""

    instance: JsspInstance
    start_times: tuple[tuple[int, ...], ...]
    makespan: int

    @staticmethod
    def from_state(state: ScheduleState) -> "ScheduleResult":
        if not state.done:
            raise ContractError("schedule is not complete")
        makespan = max(
            st + job[j][1]
            for job, row in zip(state.instance.ops, state.start_times)
            for j, st in enumerate(row)
        )
        return ScheduleResult(state.instance, state.start_times, makespan)


def verify_schedule(result: ScheduleResult) -> None:
    """Raise ContractError on any precedence or machine-overlap violation."""
    inst = result.instance
    per_machine: dict[int, list[tuple[int, int]]] = {m: [] for m in range(inst.machines)}
    for i, job in enumerate(inst.ops):
        prev_finish = 0
        for j, (m, t) in enumerate(job):
            st = result.start_times[i][j]
            if st < prev_finish:
                raise ContractError(f"job {i} op {j} starts at {st} before predecessor finishes {prev_finish}")
            prev_finish = st + t
            per_machine[m].append((st, st + t))
        if prev_finish > result.makespan:
            raise ContractError(f"job {i} finishes past the makespan")
    for m, spans in per_machine.items():
        spans.sort()
        for (s1, f1), (s2, _) in zip(spans, spans[1:]):
            if s2 < f1:
                raise ContractError(f"machine {m} overlap at t={s2}")


# ---------------------------------------------------------------------------
# Priority dispatching rules and the exhaustive oracle
# ---------------------------------------------------------------------------


def classic_pdr(instance: JsspInstance, rule: str) -> ScheduleResult:
    """Greedy dispatch by one of SPT / LPT / MWR / FIFO; ties take the
    lowest job id."""
    if rule not in PDR_RULES:
        raise ConfigError(f"unknown rule {rule!r}; pick from {PDR_RULES}")
    state = initial_state(instance)
    remaining_work = [instance.job_work(i) for i in range(instance.jobs)]
    while not state.done:
        best_job, best_priority = -1, None
        for i in state.eligible_jobs():
            _, t = instance.ops[i][state.next_op[i]]
            if rule == "SPT":
                priority = -t
            elif rule == "LPT":
                priority = t
            elif rule == "MWR":
                priority = remaining_work[i]
            else:  # FIFO: job whose next operation became available earliest
                priority = -state.job_ready[i]
            if best_priority is None or priority > best_priority:
                best_job, best_priority = i, priority
        op_index = state.next_op[best_job]
        remaining_work[best_job] -= instance.ops[best_job][op_index][1]
        state, _, _ = dispatch(state, best_job)
    return ScheduleResult.from_state(state)


def random_dispatch(instance: JsspInstance, rng: np.random.Generator) -> ScheduleResult:
    state = initial_state(instance)
    while not state.done:
        eligible = state.eligible_jobs()
        state, _, _ = dispatch(state, int(eligible[rng.integers(len(eligible))]))
    return ScheduleResult.from_state(state)


def brute_force_optimal(instance: JsspInstance) -> ScheduleResult:
    """Exact minimum-makespan schedule over all precedence-respecting
    dispatch orders under the same append semantics as ``dispatch``.

    Capped at 12 operations.  Depth-first search over dispatch orders with
    two exact reductions: branches whose lower bound already matches or
    exceeds the incumbent cannot improve it, and states identical in
    (next_op, job_ready, machine_ready) have identical completions, so
    revisits are skipped.  Neither prune can exclude an optimal order.
    """
    if instance.total_ops > BRUTE_FORCE_MAX_OPS:
        raise ContractError(
            f"brute force capped at {BRUTE_FORCE_MAX_OPS} operations, instance has {instance.total_ops}"
        )
    incumbent = min((classic_pdr(instance, rule) for rule in PDR_RULES), key=lambda r: r.makespan)
    best_makespan = incumbent.makespan
    best = incumbent
    seen: set[tuple] = set()
    stack = [initial_state(instance)]
    while stack:
        state = stack.pop()
        lb = lower_bound(state)
        if lb >= best_makespan:
            continue
        key = (state.next_op, state.job_ready, state.machine_ready)
        if key in seen:
            continue
        seen.add(key)
        if state.done:
            result = ScheduleResult.from_state(state)
            if result.makespan < best_makespan:
                best_makespan, best = result.makespan, result
            continue
        children = []
        for job in state.eligible_jobs():
            child, _, _ = dispatch(state, job)
            children.append((lower_bound(child), job, child))
        # explore the most promising child last so it pops first
        children.sort(key=lambda c: (-c[0], c[1]))
        stack.extend(child for _, _, child in children)
    return best


# ---------------------------------------------------------------------------
# Environment wrapper
# ---------------------------------------------------------------------------


class JsspEnv(Env):
    """Dispatching episode over a fixed instance or a generator family.

    Observations are a float matrix of per-operation features in (job, op)
    row-major order: completion bound normalized by H(s0), and a 0/1
    scheduled flag.  Actions pick the job whose next operation to append;
    completed jobs are masked.
    """

    def __init__(
        self,
        instance: JsspInstance | None = None,
        generator: tuple[int, int, int, int] | None = None,
    ):
        super().__init__()
        if (instance is None) == (generator is None):
            raise ConfigError("pass exactly one of instance= or generator=(jobs, machines, low, high)")
        self._fixed = instance
        self._generator = generator
        probe = instance if instance is not None else generate_taillard(*generator, seed=0)
        width = max(len(job) for job in probe.ops)
        self.action_count = probe.jobs
        self.observation_shape = (probe.jobs * width, 2)
        self._width = width
        self.instance: JsspInstance | None = None
        self.state: ScheduleState | None = None
        self._h0 = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if self._fixed is not None:
            self.instance = self._fixed
        else:
            self.instance = generate_taillard(*self._generator, seed=0 if seed is None else seed)
        self.state = initial_state(self.instance)
        self._h0 = lower_bound(self.state)
        self._done = False
        return self._observe()

    def step(self, action: int):
        self._require_live()
        self._require_action(action)
        self.state, reward, done = dispatch(self.state, action)
        self._done = done
        info = {}
        if done:
            result = ScheduleResult.from_state(self.state)
            info["makespan"] = result.makespan
            info["schedule"] = result
        return self._observe(), reward, done, info

    def valid_actions(self) -> np.ndarray:
        mask = np.zeros(self.action_count, dtype=bool)
        for i in self.state.eligible_jobs():
            mask[i] = True
        return mask

    def initial_lower_bound(self) -> int:
        return self._h0

    def _observe(self) -> np.ndarray:
        clb = clb_matrix(self.state).astype(np.float64) / max(self._h0, 1)
        # padding columns of ragged jobs read as scheduled so masks derive cleanly
        flags = np.ones((self.instance.jobs, self._width))
        for i, job in enumerate(self.instance.ops):
            flags[i, self.state.next_op[i] : len(job)] = 0.0
        obs = np.stack([clb.reshape(-1), flags.reshape(-1)], axis=1)
        return obs


def observation_mask(obs: np.ndarray, jobs: int) -> np.ndarray:
    """Recover the legal-action mask from a JsspEnv observation.

    A job is dispatchable unless all its operations carry the scheduled
    flag.  Lets learners recompute masked log-probs from stored
    observations alone.
    """
    flags = obs[:, 1].reshape(jobs, -1)
    return flags.min(axis=1) < 0.5
