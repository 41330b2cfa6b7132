"""Training orchestration: actor-learner loops, replay fine-tuning, budgets.

Actors interact with environments through a small duck-typed policy object:

    policy.load_values(values)        install a parameter snapshot
    policy.begin_episode()            reset any per-episode state
    policy.act(obs, mask, rng)        -> (action, behavior_log_prob)
    policy.observe(transition)        post-step hook (window bookkeeping etc.)

The learner is the sole mutator of parameters; actors only ever see immutable
published snapshots.  A synchronous single-actor mode reproduces runs
bit-for-bit; the threaded mode trades determinism for throughput and reports
policy lag instead.
"""

from __future__ import annotations

import hashlib
import json
import queue as queue_mod
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ConfigError, ContractError, RlforgeError, Trajectory, Transition, make_rng
from .seq.maent import DualState, MaentConfig, maent_update
from .seq.tokens import encode_window, returns_to_go_from_rewards

BUDGET_KINDS = ("steps", "episodes", "seconds")

# rng stream tags so actor randomness never collides with env or eval streams
_ACTOR_STREAM = 101


class LearnerFailureError(RlforgeError):
    """An update raised mid-run; ``partial_stats`` holds progress so far."""

    def __init__(self, message: str, partial_stats: dict | None = None):
        super().__init__(message)
        self.partial_stats = partial_stats or {}


class BudgetTracker:
    """Thread-safe accounting for a fine-tuning data budget.

    Step and episode budgets are exact: workers reserve quota up front and
    refund what an early episode end leaves unused, so the consumed total
    meets the boundary precisely.  Second budgets are wall clock on the
    training loop, checked between segments and updates.
    """

    def __init__(self, kind: str, amount):
        if kind not in BUDGET_KINDS:
            raise ConfigError(f"budget kind {kind!r} not one of {BUDGET_KINDS}")
        amount = float(amount)
        if not np.isfinite(amount) or amount < 0:
            raise ConfigError(f"budget amount must be finite and >= 0, got {amount}")
        if kind != "seconds" and amount != int(amount):
            raise ConfigError(f"{kind} budget must be a whole number, got {amount}")
        self.kind = kind
        self.amount = amount
        self._used = 0.0
        self._started: float | None = None
        self._lock = threading.Lock()

    def start(self) -> None:
        """Open the wall-clock window (no-op for step/episode budgets)."""
        if self.kind == "seconds" and self._started is None:
            self._started = time.monotonic()

    @property
    def consumed(self) -> float:
        if self.kind == "seconds":
            return 0.0 if self._started is None else time.monotonic() - self._started
        return self._used

    @property
    def remaining(self) -> float:
        return max(0.0, self.amount - self.consumed)

    @property
    def exhausted(self) -> bool:
        if self.amount == 0:
            return True
        return self.remaining <= 0.0

    def reserve_steps(self, n: int) -> int:
        if self.kind != "steps":
            raise ContractError(f"reserve_steps on a {self.kind} budget")
        with self._lock:
            take = int(min(n, self.amount - self._used))
            self._used += take
            return take

    def refund_steps(self, n: int) -> None:
        if self.kind != "steps":
            raise ContractError(f"refund_steps on a {self.kind} budget")
        with self._lock:
            self._used -= n
            if self._used < 0:
                raise ContractError("refunded more steps than were reserved")

    def reserve_episode(self) -> bool:
        if self.kind != "episodes":
            raise ContractError(f"reserve_episode on a {self.kind} budget")
        with self._lock:
            if self._used < self.amount:
                self._used += 1
                return True
            return False


class ReplayBuffer:
    """FIFO trajectory store with uniform sampling."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque[Trajectory] = deque(maxlen=capacity)
        self.total_added = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, trajectory: Trajectory) -> None:
        self._items.append(trajectory)
        self.total_added += 1

    def sample(self, batch: int, rng: np.random.Generator) -> list[Trajectory]:
        if not self._items:
            raise ContractError("cannot sample from an empty buffer")
        picks = rng.integers(len(self._items), size=batch)
        return [self._items[i] for i in picks]

    def sample_windows(self, batch, context, quantizer, patch_count, rng):
        """Cut ``batch`` uniform length-``context`` sub-trajectories as token windows.

        Returns-to-go are computed over each stored trajectory before slicing,
        so a window's return tokens reflect the tail of its own episode.
        """
        windows = []
        for traj in self.sample(batch, rng):
            ts = traj.transitions
            rtg = returns_to_go_from_rewards(traj.rewards())
            if len(ts) <= context:
                lo, hi = 0, len(ts)
            else:
                lo = int(rng.integers(len(ts) - context + 1))
                hi = lo + context
            windows.append(
                encode_window(
                    [t.observation for t in ts[lo:hi]],
                    rtg[lo:hi],
                    [t.action for t in ts[lo:hi]],
                    [t.reward for t in ts[lo:hi]],
                    context,
                    quantizer,
                    patch_count,
                )
            )
        return windows


@dataclass(frozen=True)
class PolicySnapshot:
    version: int
    values: tuple[np.ndarray, ...]


class SnapshotStore:
    """Versioned, immutable parameter snapshots published by the learner."""

    def __init__(self, initial_values):
        self._lock = threading.Lock()
        self._snap = PolicySnapshot(0, _freeze_values(initial_values))

    def publish(self, values) -> int:
        with self._lock:
            self._snap = PolicySnapshot(self._snap.version + 1, _freeze_values(values))
            return self._snap.version

    def latest(self) -> PolicySnapshot:
        with self._lock:
            return self._snap


def _freeze_values(values) -> tuple[np.ndarray, ...]:
    out = []
    for v in values:
        arr = np.array(v, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        out.append(arr)
    return tuple(out)


@dataclass(frozen=True)
class Segment:
    """One actor-emitted trajectory slice plus provenance for lag accounting."""

    trajectory: Trajectory
    actor_id: int
    policy_version: int


def rollout_segment(env, policy, rng, max_steps: int, carry_obs=None):
    """Advance one episode by up to ``max_steps`` transitions.

    ``carry_obs`` is the pending observation of an episode left unfinished by
    a previous call, or None to reset.  Returns (transitions, next_carry);
    next_carry is None once the episode terminated, so segments never span
    episode boundaries.
    """
    if max_steps < 1:
        raise ContractError(f"max_steps must be >= 1, got {max_steps}")
    if carry_obs is None:
        obs = env.reset()
        policy.begin_episode()
    else:
        obs = carry_obs
    transitions = []
    for _ in range(max_steps):
        mask = env.valid_actions()
        action, logp = policy.act(obs, mask, rng)
        nxt, reward, done, _ = env.step(int(action))
        tr = Transition(obs, int(action), float(reward), nxt, bool(done), float(logp))
        transitions.append(tr)
        policy.observe(tr)
        obs = nxt
        if done:
            return transitions, None
    return transitions, obs


def run_actor(env, policy, snapshots: SnapshotStore, n: int, rng, *, budget=None, actor_id=0):
    """Generate trajectory segments forever (or until the budget refuses).

    Fresh parameters are pulled from ``snapshots`` before every segment; each
    emitted Segment records the version it acted under.
    """
    carry = None
    while True:
        snap = snapshots.latest()
        policy.load_values(snap.values)
        quota = n
        if budget is not None:
            if budget.kind == "steps":
                quota = budget.reserve_steps(n)
                if quota == 0:
                    return
            elif budget.kind == "episodes":
                if carry is None and not budget.reserve_episode():
                    return
            elif budget.exhausted:
                return
        transitions, carry = rollout_segment(env, policy, rng, quota, carry)
        if budget is not None and budget.kind == "steps" and len(transitions) < quota:
            budget.refund_steps(quota - len(transitions))
        yield Segment(Trajectory(tuple(transitions)), actor_id, snap.version)


@dataclass(frozen=True)
class ActorLearnerConfig:
    actor_count: int = 4
    segment_length: int = 20
    queue_capacity: int = 64
    batch_segments: int = 32

    def __post_init__(self):
        for name in ("actor_count", "segment_length", "queue_capacity", "batch_segments"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


def train_actor_learner(env_factory, policy_factory, learner_step, snapshot_values, cfg, budget, seed, segment_sink=None):
    """Threaded actor-learner training until ``budget`` is exhausted.

    env_factory(actor_idx) -> Env       one independent instance per actor
    policy_factory() -> acting policy   see module docstring protocol
    learner_step(list[Trajectory])      one gradient update, mutates the nets
    snapshot_values() -> array list     current parameters, copied on publish
    segment_sink(Segment)               optional tap on every consumed segment

    The learner runs on the calling thread, draining segments in arrival
    order and batching them to ``cfg.batch_segments``.  Returns a stats dict
    satisfying produced == consumed + queued + discarded_at_shutdown.
    """
    store = SnapshotStore(snapshot_values())
    q: queue_mod.Queue = queue_mod.Queue(maxsize=cfg.queue_capacity)
    stop = threading.Event()
    produced = [0] * cfg.actor_count
    discarded = [0] * cfg.actor_count
    live = [cfg.actor_count]
    live_lock = threading.Lock()
    actor_errors: list[BaseException] = []

    def actor_main(idx: int):
        try:
            rng = make_rng(seed, _ACTOR_STREAM, idx)
            env = env_factory(idx)
            policy = policy_factory()
            carry = None
            while not stop.is_set():
                snap = store.latest()
                policy.load_values(snap.values)
                quota = cfg.segment_length
                if budget.kind == "steps":
                    quota = budget.reserve_steps(quota)
                    if quota == 0:
                        return
                elif budget.kind == "episodes":
                    if carry is None and not budget.reserve_episode():
                        return
                elif budget.exhausted:
                    return
                transitions, carry = rollout_segment(env, policy, rng, quota, carry)
                if budget.kind == "steps" and len(transitions) < quota:
                    budget.refund_steps(quota - len(transitions))
                seg = Segment(Trajectory(tuple(transitions)), idx, snap.version)
                produced[idx] += 1
                while not stop.is_set():
                    try:
                        q.put(seg, timeout=0.02)
                        break
                    except queue_mod.Full:
                        continue
                else:
                    # shutdown raced a full queue; the segment was never enqueued
                    discarded[idx] += 1
                    return
        except BaseException as exc:  # surface actor crashes to the learner
            actor_errors.append(exc)
            stop.set()
        finally:
            with live_lock:
                live[0] -= 1

    threads = [threading.Thread(target=actor_main, args=(i,), daemon=True) for i in range(cfg.actor_count)]
    budget.start()
    for t in threads:
        t.start()

    batch: list[Segment] = []
    consumed = updates = lag_sum = lag_count = steps_consumed = episodes_consumed = 0
    stats: dict = {}

    def do_update():
        nonlocal updates, lag_sum, lag_count
        current = store.latest().version
        for s in batch:
            lag_sum += current - s.policy_version
            lag_count += 1
        learner_step([s.trajectory for s in batch])
        store.publish(snapshot_values())
        updates += 1
        batch.clear()

    failure: LearnerFailureError | None = None
    try:
        while True:
            if actor_errors:
                raise actor_errors[0]
            if budget.kind == "seconds" and budget.exhausted:
                break
            try:
                seg = q.get(timeout=0.05)
            except queue_mod.Empty:
                with live_lock:
                    idle = live[0] == 0
                if idle and q.empty():
                    break
                continue
            consumed += 1
            steps_consumed += seg.trajectory.length
            episodes_consumed += int(seg.trajectory.terminal)
            if segment_sink is not None:
                segment_sink(seg)
            batch.append(seg)
            if len(batch) >= cfg.batch_segments:
                do_update()
        # leftover partial batch: its data fit the budget, so train on it,
        # except under a seconds budget where the clock has already run out
        if batch and budget.kind != "seconds":
            do_update()
    except BaseException as exc:
        failure = LearnerFailureError(f"training aborted: {exc}")
        failure.__cause__ = exc
    finally:
        stop.set()
        for t in threads:
            t.join()

    stats = {
        "produced": sum(produced),
        "consumed": consumed,
        "queued": q.qsize(),
        "discarded_at_shutdown": sum(discarded),
        "updates": updates,
        "final_version": store.latest().version,
        "mean_policy_lag": lag_sum / lag_count if lag_count else 0.0,
        "env_steps": steps_consumed,
        "episodes": episodes_consumed,
        "budget_consumed": budget.consumed,
    }
    if failure is not None:
        failure.partial_stats = stats
        raise failure
    return stats


def train_synchronous(env, policy, learner_step, snapshot_values, cfg, budget, seed, segment_sink=None):
    """Single-actor, single-thread variant of train_actor_learner.

    Identical seeds give bit-identical runs: the one actor draws from a fixed
    rng stream and always acts on the newest snapshot, so policy lag is zero
    and produced == consumed with nothing left queued.
    """
    store = SnapshotStore(snapshot_values())
    rng = make_rng(seed, _ACTOR_STREAM, 0)
    carry = None
    batch: list[Segment] = []
    produced = updates = steps_consumed = episodes_consumed = 0
    budget.start()

    def do_update():
        nonlocal updates
        learner_step([s.trajectory for s in batch])
        store.publish(snapshot_values())
        updates += 1
        batch.clear()

    while True:
        if budget.kind == "seconds" and budget.exhausted:
            break
        policy.load_values(store.latest().values)
        quota = cfg.segment_length
        if budget.kind == "steps":
            quota = budget.reserve_steps(quota)
            if quota == 0:
                break
        elif budget.kind == "episodes":
            if carry is None and not budget.reserve_episode():
                break
        transitions, carry = rollout_segment(env, policy, rng, quota, carry)
        if budget.kind == "steps" and len(transitions) < quota:
            budget.refund_steps(quota - len(transitions))
        seg = Segment(Trajectory(tuple(transitions)), 0, store.latest().version)
        produced += 1
        steps_consumed += seg.trajectory.length
        episodes_consumed += int(seg.trajectory.terminal)
        if segment_sink is not None:
            segment_sink(seg)
        batch.append(seg)
        if len(batch) >= cfg.batch_segments:
            do_update()
    if batch and budget.kind != "seconds":
        do_update()

    return {
        "produced": produced,
        "consumed": produced,
        "queued": 0,
        "discarded_at_shutdown": 0,
        "updates": updates,
        "final_version": store.latest().version,
        "mean_policy_lag": 0.0,
        "env_steps": steps_consumed,
        "episodes": episodes_consumed,
        "budget_consumed": budget.consumed,
    }


def finetune_mgdt(env, model, policy, cfg: MaentConfig, budget, quantizer, rng, optimizer, segment_sink=None):
    """Replay-buffer fine-tuning of a sequence policy.

    Alternates data collection and entropy-constrained updates: one episode
    of rollout (trimmed exactly to a step budget), then
    ``cfg.updates_between_rollouts`` updates, each on a fresh uniform sample
    of ``cfg.batch`` length-``cfg.context`` windows.  Stops when the budget
    refuses further collection.
    """
    if env.action_count != model.cfg.action_count:
        raise ContractError(
            f"env has {env.action_count} actions but the model expects {model.cfg.action_count}"
        )
    buffer = ReplayBuffer(cfg.buffer_capacity)
    state = DualState()
    j_hist: list[float] = []
    h_hist: list[float] = []
    episodes = env_steps = updates = 0
    budget.start()

    while True:
        if updates % cfg.updates_between_rollouts == 0:
            traj = collect_episode(env, policy, rng, budget)
            if traj is None:
                break
            buffer.add(traj)
            if segment_sink is not None:
                segment_sink(Segment(traj, 0, updates))
            env_steps += traj.length
            episodes += int(traj.terminal)
        if budget.kind == "seconds" and budget.exhausted:
            break
        windows = buffer.sample_windows(cfg.batch, cfg.context, quantizer, model.cfg.patch_count, rng)
        st = maent_update(windows, model, cfg, state, optimizer)
        j_hist.append(st["J"])
        h_hist.append(st["H"])
        updates += 1

    return {
        "updates": updates,
        "episodes": episodes,
        "env_steps": env_steps,
        "J": j_hist,
        "H": h_hist,
        "lam": state.lam,
        "buffer_size": len(buffer),
        "buffer_added": buffer.total_added,
        "budget_consumed": budget.consumed,
    }


def collect_episode(env, policy, rng, budget):
    """One budget-gated episode; None when the budget refuses any data."""
    if budget.kind == "episodes":
        if not budget.reserve_episode():
            return None
    elif budget.kind == "seconds":
        if budget.exhausted:
            return None
    transitions: list[Transition] = []
    carry = None
    while True:
        if budget.kind == "steps":
            quota = budget.reserve_steps(64)
            if quota == 0:
                break
        else:
            quota = 64
        chunk, carry = rollout_segment(env, policy, rng, quota, carry)
        if budget.kind == "steps" and len(chunk) < quota:
            budget.refund_steps(quota - len(chunk))
        transitions.extend(chunk)
        if carry is None:
            break
    if not transitions:
        return None
    return Trajectory(tuple(transitions))


# --- run records and run directories -------------------------------------

# wall-clock fields are machine-local; they are excluded from the canonical
# byte form so determinism checks compare only reproducible content
TIMING_FIELDS = ("train_seconds", "test_seconds")


def config_fingerprint(config: dict) -> str:
    """Stable hash over every decided hyperparameter."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class RunRecord:
    """Everything one experiment run decided, produced, and measured."""

    run_id: str
    agent: str
    environment: str
    seed: int
    budget: str
    budget_kind: str
    budget_amount: float
    config: dict
    episode_returns: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    censuses: dict = field(default_factory=dict)
    makespans: list = field(default_factory=list)
    train_seconds: float = 0.0
    test_seconds: float = 0.0
    status: str = "complete"
    error: str = ""
    fingerprint: str = ""

    _BUDGET_TAGS = ("zero_shot", "one_pct", "two_pct", "custom")

    def __post_init__(self):
        if self.budget not in self._BUDGET_TAGS:
            raise ConfigError(f"budget tag {self.budget!r} not one of {self._BUDGET_TAGS}")
        if self.budget_kind not in BUDGET_KINDS:
            raise ConfigError(f"budget kind {self.budget_kind!r} not one of {BUDGET_KINDS}")
        derived = config_fingerprint(self.config)
        if self.fingerprint and self.fingerprint != derived:
            raise ContractError("stored fingerprint does not re-derive from the stored config")
        self.fingerprint = derived

    def _as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "agent": self.agent,
            "environment": self.environment,
            "seed": self.seed,
            "budget": self.budget,
            "budget_kind": self.budget_kind,
            "budget_amount": self.budget_amount,
            "config": self.config,
            "episode_returns": list(self.episode_returns),
            "metrics": self.metrics,
            "censuses": self.censuses,
            "makespans": list(self.makespans),
            "train_seconds": self.train_seconds,
            "test_seconds": self.test_seconds,
            "status": self.status,
            "error": self.error,
            "fingerprint": self.fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self._as_dict(), sort_keys=True, indent=2) + "\n"

    def canonical_bytes(self) -> bytes:
        payload = {k: v for k, v in self._as_dict().items() if k not in TIMING_FIELDS}
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        raw = json.loads(text)
        return cls(**raw)


def write_run_dir(out_dir, record: RunRecord, *, segments=None, checkpoints=None) -> Path:
    """Persist one run: fingerprint file, record, optional logs and weights.

    ``segments`` is an iterable of Segment; they land in per-actor JSONL
    files, one transition per line.  ``checkpoints`` maps a file stem to a
    parameter list accepted by nn.checkpoint.save_params.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    canon = json.dumps(record.config, sort_keys=True, separators=(",", ":"))
    (out / "config.fingerprint").write_text(f"{record.fingerprint}\n{canon}\n", encoding="utf-8")
    (out / "run_record.json").write_text(record.to_json(), encoding="utf-8")
    if segments:
        by_actor: dict[int, list[str]] = {}
        seg_index: dict[int, int] = {}
        for seg in segments:
            k = seg_index.get(seg.actor_id, 0)
            seg_index[seg.actor_id] = k + 1
            for i, tr in enumerate(seg.trajectory.transitions):
                line = json.dumps(
                    {
                        "segment": k,
                        "step": i,
                        "policy_version": seg.policy_version,
                        "observation": np.asarray(tr.observation).tolist(),
                        "action": tr.action,
                        "reward": tr.reward,
                        "terminal": tr.terminal,
                        "behavior_log_prob": tr.behavior_log_prob,
                    },
                    sort_keys=True,
                )
                by_actor.setdefault(seg.actor_id, []).append(line)
        for actor_id, lines in sorted(by_actor.items()):
            (out / f"actor_{actor_id:02d}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if checkpoints:
        ckpt_dir = out / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        from .nn.checkpoint import save_params

        for stem, params in checkpoints.items():
            save_params(str(ckpt_dir / f"{stem}.ckpt"), params)
    return out


def read_run_record(path) -> RunRecord:
    return RunRecord.from_json(Path(path).read_text(encoding="utf-8"))
