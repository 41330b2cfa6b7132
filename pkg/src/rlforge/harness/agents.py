"""Agent assembly: acting policies, learners, and evaluation plumbing.

Five ready-made agents cover the experiment grid.  Two drive a shared
policy/value MLP (IMPALA-V_TRACE, IMPALA-PPO); three share one sequence
model trunk and differ only in the fine-tuning objective (MGDT-MAENT,
MGDT-DQN, MGDT-PPO).  Every agent exposes the same four verbs:

    pretrain(steps)        -> stats dict
    finetune(budget)       -> stats dict
    evaluate(seed, scale)  -> EvalResult
    config()               -> flat dict of every decided hyperparameter

so the protocol layer can run the grid without caring which family it is
holding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import ContractError, Trajectory, Transition, make_rng
from ..envs.blockmaze import BugCensus
from ..envs.pacgrid import GateCensus
from ..learners import (
    DEFAULT_SURROGATE_EPOCHS,
    DqnConfig,
    PolicyValueNet,
    PpoConfig,
    epsilon_at,
    gae_advantages,
    mask_logits_tensor,
    ppo_update,
    sample_action,
    vtrace_learner_update,
)
from ..nn import tape
from ..nn.optim import DecayedAdam, RmsProp
from ..runtime import (
    ActorLearnerConfig,
    BudgetTracker,
    ReplayBuffer,
    Segment,
    collect_episode,
    finetune_mgdt,
    train_actor_learner,
    train_synchronous,
)
from ..seq.maent import MaentConfig, default_beta
from ..seq.model import (
    SeqModelConfig,
    SequencePolicyModel,
    sample_window_action,
    stack_windows,
    window_action_dist,
)
from ..seq.tokens import ReturnQuantizer, encode_window, patch_tiling, returns_to_go_from_rewards
from ..vtrace import VTraceConfig
from . import tasks
from .tasks import TaskSpec

AGENT_TAGS = ("IMPALA-V_TRACE", "IMPALA-PPO", "MGDT-DQN", "MGDT-PPO", "MGDT-MAENT")


# ---------------------------------------------------------------------------
# Acting policies
# ---------------------------------------------------------------------------


class NetPolicy:
    """Samples from a policy/value MLP; the actor-side half of IMPALA."""

    def __init__(self, obs_width: int, action_count: int):
        self._net = PolicyValueNet(obs_width, action_count, make_rng(0, 0))
        self._width = obs_width

    def load_values(self, values) -> None:
        self._net.load_values(values)

    def begin_episode(self) -> None:
        pass

    def act(self, observation, mask, rng):
        flat = np.asarray(observation, dtype=np.float64).reshape(1, self._width)
        logits, _ = self._net.apply(flat)
        return sample_action(logits[0], rng, mask)

    def observe(self, transition: Transition) -> None:
        pass


class SequencePolicy:
    """Rolling-window acting for the sequence model.

    Keeps the last context-1 completed steps; the current observation joins
    them with placeholder action/reward tokens (which the causal mask hides
    from the decision slot anyway).  The return-to-go starts at a target
    value and drops by each realized reward, the usual return-conditioned
    decoding scheme.
    """

    def __init__(
        self,
        model: SequencePolicyModel,
        quantizer: ReturnQuantizer,
        patch_count: int,
        target_return: float,
        temperature: float = 1.0,
        use_mask: bool = False,
    ):
        self._model = model
        self._quantizer = quantizer
        self._patch_count = patch_count
        self._target = float(target_return)
        self._temperature = float(temperature)
        self._use_mask = use_mask
        self.begin_episode()

    def load_values(self, values) -> None:
        self._model.load_values(values)

    def begin_episode(self) -> None:
        self._obs: list[np.ndarray] = []
        self._acts: list[int] = []
        self._rews: list[float] = []
        self._rtgs: list[float] = []
        self._ret = self._target

    def _window(self, observation):
        keep = self._model.cfg.context - 1
        lo = max(0, len(self._obs) - keep)
        return encode_window(
            self._obs[lo:] + [observation],
            self._rtgs[lo:] + [self._ret],
            self._acts[lo:] + [0],
            self._rews[lo:] + [0.0],
            self._model.cfg.context,
            self._quantizer,
            self._patch_count,
        )

    def act(self, observation, mask, rng):
        window = self._window(observation)
        m = mask if self._use_mask else None
        action, dist = sample_window_action(self._model, window, rng, self._temperature, m)
        return action, float(math.log(dist.probs[action]))

    def observe(self, transition: Transition) -> None:
        self._obs.append(transition.observation)
        self._acts.append(int(transition.action))
        self._rews.append(float(transition.reward))
        self._rtgs.append(self._ret)
        self._ret -= float(transition.reward)
        keep = self._model.cfg.context  # no need to remember further back
        if len(self._obs) > keep:
            del self._obs[0], self._acts[0], self._rews[0], self._rtgs[0]


class GreedySequencePolicy(SequencePolicy):
    """Epsilon-greedy over the sequence model's action logits (Q readout).

    With ``dqn_cfg=None`` this is pure greedy, the evaluation mode; during
    fine-tuning epsilon anneals on the policy's own env-step counter.
    """

    def __init__(self, model, quantizer, patch_count, target_return, dqn_cfg=None, use_mask=False):
        self._dqn_cfg = dqn_cfg
        self._env_steps = 0
        super().__init__(model, quantizer, patch_count, target_return, 0.0, use_mask)

    def act(self, observation, mask, rng):
        window = self._window(observation)
        dist = window_action_dist(self._model, window, 0.0, mask if self._use_mask else None)
        greedy = int(np.argmax(dist.probs))
        valid = np.flatnonzero(np.asarray(mask, dtype=bool))
        if valid.size == 0:
            raise ContractError("no valid action to act on")
        eps = 0.0 if self._dqn_cfg is None else epsilon_at(self._env_steps, self._dqn_cfg)
        self._env_steps += 1
        if eps > 0.0 and rng.random() < eps:
            action = int(valid[rng.integers(valid.size)])
        else:
            action = greedy
        prob = (eps / valid.size if action in valid else 0.0) + (1.0 - eps) * (action == greedy)
        return action, float(math.log(prob))


# ---------------------------------------------------------------------------
# Per-step window construction for the sequence-model learners
# ---------------------------------------------------------------------------


def step_windows(trajectory: Trajectory, context, quantizer, patch_count):
    """One left-padded window per step t, covering steps max(0,t-K+1)..t."""
    ts = trajectory.transitions
    obs = [t.observation for t in ts]
    acts = [int(t.action) for t in ts]
    rews = [float(t.reward) for t in ts]
    rtg = returns_to_go_from_rewards(rews)
    out = []
    for t in range(len(ts)):
        lo = max(0, t - context + 1)
        out.append(
            encode_window(
                obs[lo : t + 1], rtg[lo : t + 1], acts[lo : t + 1], rews[lo : t + 1], context, quantizer, patch_count
            )
        )
    return out


def _successor_window(trajectory, t, context, quantizer, patch_count):
    """The window the acting policy would see at step t+1, before acting.

    Built from real steps up to t plus next_observation with placeholder
    action/reward tokens; causal masking keeps those placeholders out of
    the decision slot, so this matches a real inference window bit for bit.
    """
    ts = trajectory.transitions
    obs = [tr.observation for tr in ts]
    acts = [int(tr.action) for tr in ts]
    rews = [float(tr.reward) for tr in ts]
    rtg = returns_to_go_from_rewards(rews)
    lo = max(0, t + 1 - context + 1)
    return encode_window(
        obs[lo : t + 1] + [ts[t].next_observation],
        list(rtg[lo : t + 1]) + [float(rtg[t] - rews[t])],
        acts[lo : t + 1] + [0],
        rews[lo : t + 1] + [0.0],
        context,
        quantizer,
        patch_count,
    )


@dataclass
class QSample:
    window: object
    next_window: object
    action: int
    reward: float
    terminal: bool
    next_mask: np.ndarray | None


def sample_qlearn_batch(buffer: ReplayBuffer, n, context, quantizer, patch_count, rng, mask_fn=None):
    """Uniform (trajectory, step) pairs as window/next-window TD samples."""
    out = []
    for traj in buffer.sample(n, rng):
        ts = traj.transitions
        t = int(rng.integers(len(ts)))
        obs = [tr.observation for tr in ts]
        acts = [int(tr.action) for tr in ts]
        rews = [float(tr.reward) for tr in ts]
        rtg = returns_to_go_from_rewards(rews)
        lo = max(0, t - context + 1)
        window = encode_window(
            obs[lo : t + 1], rtg[lo : t + 1], acts[lo : t + 1], rews[lo : t + 1], context, quantizer, patch_count
        )
        terminal = ts[t].terminal
        nxt = _successor_window(traj, t, context, quantizer, patch_count)
        next_mask = None
        if mask_fn is not None and not terminal:
            next_mask = np.asarray(mask_fn(ts[t].next_observation), dtype=np.float64)
        out.append(QSample(window, nxt, acts[t], rews[t], terminal, next_mask))
    return out


def window_dqn_update(online: SequencePolicyModel, target: SequencePolicyModel, samples, cfg: DqnConfig, optimizer):
    """Huber TD step on the action logits read as Q values at the last slot."""
    if not samples:
        raise ContractError("empty q-learning batch")
    k = online.cfg.context
    cur = stack_windows([s.window for s in samples])
    nxt = stack_windows([s.next_window for s in samples])
    rewards = np.array([s.reward for s in samples], dtype=np.float64)
    terminal = np.array([s.terminal for s in samples], dtype=np.float64)
    actions = np.array([s.action for s in samples], dtype=np.int64)

    next_logits, _ = target.apply(nxt[0], nxt[1], nxt[2], nxt[3])
    qn = next_logits[:, -1, :].astype(np.float64)
    for i, s in enumerate(samples):
        if s.next_mask is not None:
            qn[i] = np.where(s.next_mask > 0, qn[i], -np.inf)
    best = qn.max(axis=-1)
    if not np.all(np.isfinite(np.where(terminal > 0, 0.0, best))):
        raise ContractError("non-terminal sample with no valid next action")
    targets = rewards + cfg.gamma * (1.0 - terminal) * np.where(terminal > 0, 0.0, best)

    logits_t, _ = online.forward(cur[0], cur[1], cur[2], cur[3])
    last = tape.reshape(tape.take_axis(logits_t, np.array([k - 1]), axis=1), (len(samples), online.cfg.action_count))
    picked = tape.select_last_axis(last, actions)
    loss = tape.reduce_mean(tape.huber(picked - tape.constant(targets), cfg.huber_delta))
    for _, p in online.parameters():
        p.zero_grad()
    loss.backward()
    optimizer.step()
    return {"loss": loss.item(), "mean_target": float(targets.mean())}


def window_ppo_update(model: SequencePolicyModel, trajectory: Trajectory, cfg: PpoConfig, optimizer, quantizer, patch_count, mask_fn=None):
    """Clipped-surrogate epochs over one trajectory, per-step windows.

    Old log-probs are the stored behavior values; advantages come from GAE
    against the value head before the first pass and stay frozen.
    """
    ts = trajectory.transitions
    if not ts:
        raise ContractError("empty trajectory")
    k = model.cfg.context
    windows = step_windows(trajectory, k, quantizer, patch_count)
    cur = stack_windows(windows)
    actions = np.array([t.action for t in ts], dtype=np.int64)
    old_logp = np.array([t.behavior_log_prob for t in ts], dtype=np.float64)
    rewards = np.array([t.reward for t in ts], dtype=np.float64)

    _, values_np = model.apply(cur[0], cur[1], cur[2], cur[3])
    values = values_np[:, -1].astype(np.float64)
    if ts[-1].terminal:
        bootstrap = 0.0
    else:
        nxt = _successor_window(trajectory, len(ts) - 1, k, quantizer, patch_count)
        _, nv = model.apply(nxt.patches[None], nxt.returns[None], nxt.actions[None], nxt.rewards[None])
        bootstrap = float(nv[0, -1])
    advantages, returns = gae_advantages(rewards, values, bootstrap, cfg.gamma, cfg.gae_lambda)
    if cfg.normalize_advantages and len(ts) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    masks = None
    if mask_fn is not None:
        masks = np.stack([np.asarray(mask_fn(t.observation), dtype=np.float64) for t in ts])

    n, a = len(ts), model.cfg.action_count
    stats = {}
    for _ in range(cfg.surrogate_epochs):
        logits_t, values_t = model.forward(cur[0], cur[1], cur[2], cur[3])
        last = tape.reshape(tape.take_axis(logits_t, np.array([k - 1]), axis=1), (n, a))
        vlast = tape.reshape(tape.take_axis(values_t, np.array([k - 1]), axis=1), (n,))
        logp_all = tape.log_softmax(mask_logits_tensor(last, masks))
        chosen = tape.select_last_axis(logp_all, actions)
        ratio = tape.exp(chosen - tape.constant(old_logp))
        surr1 = ratio * tape.constant(advantages)
        surr2 = tape.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * tape.constant(advantages)
        policy_loss = tape.scale(tape.reduce_mean(tape.minimum(surr1, surr2)), -1.0)
        value_loss = tape.reduce_mean(tape.square(vlast - tape.constant(returns)))
        total = policy_loss + tape.scale(value_loss, cfg.value_cost)
        if cfg.entropy_cost != 0.0:
            probs = tape.softmax(mask_logits_tensor(last, masks))
            neg_entropy = tape.reduce_mean(tape.reduce_sum(probs * logp_all, axis=-1))
            total = total + tape.scale(neg_entropy, cfg.entropy_cost)
        for _, p in model.parameters():
            p.zero_grad()
        total.backward()
        optimizer.step()
        stats = {
            "policy_loss": policy_loss.item(),
            "value_loss": value_loss.item(),
            "total_loss": total.item(),
        }
    return stats


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    episode_returns: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    censuses: dict = field(default_factory=dict)
    makespans: list = field(default_factory=list)


def _instance_seed(task: TaskSpec, k: int) -> int:
    # held-out stream, disjoint from the training reset counter
    return 900_000 + task.env_seed * 10_007 + k


def evaluate_policy(task: TaskSpec, policy, seed: int, eval_scale: float = 1.0) -> EvalResult:
    """Run the task's evaluation protocol and fold events into censuses.

    Step-budgeted tasks trim the final episode at the exact step boundary;
    episode- and instance-budgeted tasks always finish what they start.
    """
    if eval_scale <= 0 or not np.isfinite(eval_scale):
        raise ContractError(f"eval_scale must be positive and finite, got {eval_scale}")
    rng = make_rng(seed, 71)
    env = tasks.eval_env(task)
    amount = max(1, int(round(task.eval_amount * eval_scale)))

    result = EvalResult()
    bug_census = BugCensus()
    gate_census = GateCensus()
    steps_total = 0

    def run_episode(reset_seed=None, step_cap=None):
        nonlocal steps_total
        obs = env.reset(seed=reset_seed) if reset_seed is not None else env.reset()
        policy.begin_episode()
        ep_return = 0.0
        while True:
            mask = env.valid_actions()
            action, logp = policy.act(obs, mask, rng)
            nxt, reward, done, info = env.step(action)
            policy.observe(Transition(obs, action, float(reward), nxt, bool(done), logp))
            obs = nxt
            ep_return += float(reward)
            steps_total += 1
            if "bug_events" in info:
                bug_census.record(info["bug_events"])
            if "gate_events" in info:
                gate_census.record(info["gate_events"])
            if done:
                if "makespan" in info:
                    result.makespans.append(float(info["makespan"]))
                break
            if step_cap is not None and steps_total >= step_cap:
                break
        result.episode_returns.append(ep_return)

    if task.eval_kind == "steps":
        while steps_total < amount:
            run_episode(step_cap=amount)
    elif task.eval_kind == "episodes":
        for _ in range(amount):
            run_episode()
    elif task.eval_kind == "instances":
        for k in range(amount):
            run_episode(reset_seed=_instance_seed(task, k))
    else:
        raise ContractError(f"unknown eval kind {task.eval_kind!r}")

    metrics = {
        "cumulative_reward": float(np.mean(result.episode_returns)),
        "episodes": float(len(result.episode_returns)),
        "env_steps": float(steps_total),
    }
    if task.name == "blockmaze":
        result.censuses = {k: float(v) for k, v in bug_census.as_dict().items()}
        metrics.update(result.censuses)
    elif task.name == "pacgrid":
        result.censuses = {k: float(v) for k, v in gate_census.as_dict().items()}
        metrics.update(result.censuses)
    else:
        metrics["makespan"] = float(np.mean(result.makespans))
    result.metrics = metrics
    return result


# ---------------------------------------------------------------------------
# IMPALA-family agents
# ---------------------------------------------------------------------------


_DEFAULT_OPTIONS = {
    "agent.actors": 4,
    "agent.segment_length": 20,
    "agent.batch_segments": 32,
    "agent.updates_between_rollouts": 300,
    "agent.context": 4,
    "agent.temperature": 1.0,
}


def _opt(options, key):
    return (options or {}).get(key, _DEFAULT_OPTIONS[key])


def _epochs_for(task: TaskSpec) -> int:
    fam = "pdr" if task.name.startswith("jssp") else task.name
    return DEFAULT_SURROGATE_EPOCHS[fam]


class ImpalaAgent:
    """Actor-learner MLP agent; `algo` picks the off-policy correction."""

    def __init__(self, tag: str, task: TaskSpec, seed: int, options: dict | None = None):
        if tag not in ("IMPALA-V_TRACE", "IMPALA-PPO"):
            raise ContractError(f"not an IMPALA tag: {tag}")
        self.tag = tag
        self.task = task
        self.seed = seed
        env = tasks.train_env(task)
        self.obs_width = int(np.prod(env.observation_shape))
        self.action_count = env.action_count
        self.net = PolicyValueNet(self.obs_width, self.action_count, make_rng(seed, 11))
        self.opt = RmsProp(self.net.parameters())
        self._mask = tasks.mask_fn(task)
        self._actors = int(_opt(options, "agent.actors"))
        self._segment = int(_opt(options, "agent.segment_length"))
        self._batch_segments = int(_opt(options, "agent.batch_segments"))
        if tag == "IMPALA-V_TRACE":
            self.vtrace_cfg = VTraceConfig()
            self.ppo_cfg = None
        else:
            self.vtrace_cfg = None
            self.ppo_cfg = PpoConfig(surrogate_epochs=_epochs_for(task))

    def config(self) -> dict:
        out = {
            "agent.tag": self.tag,
            "agent.obs_width": self.obs_width,
            "agent.action_count": self.action_count,
            "agent.net_hidden": "64,64",
            "agent.actors": self._actors,
            "agent.segment_length": self._segment,
            "agent.batch_segments": self._batch_segments,
            "opt.kind": "rmsprop",
            "opt.lr": self.opt.lr,
            "opt.smoothing": self.opt.smoothing,
            "opt.epsilon": self.opt.epsilon,
        }
        if self.vtrace_cfg is not None:
            c = self.vtrace_cfg
            out.update(
                {
                    "vtrace.rho_bar": c.rho_bar,
                    "vtrace.c_bar": c.c_bar,
                    "vtrace.gamma": c.gamma,
                    "vtrace.baseline_cost": c.baseline_cost,
                    "vtrace.entropy_cost": c.entropy_cost,
                }
            )
        else:
            c = self.ppo_cfg
            out.update(
                {
                    "ppo.clip": c.clip,
                    "ppo.surrogate_epochs": c.surrogate_epochs,
                    "ppo.gamma": c.gamma,
                    "ppo.gae_lambda": c.gae_lambda,
                    "ppo.value_cost": c.value_cost,
                    "ppo.entropy_cost": c.entropy_cost,
                }
            )
        return out

    def make_policy(self) -> NetPolicy:
        policy = NetPolicy(self.obs_width, self.action_count)
        policy.load_values(self.net.param_values())
        return policy

    def _trajectory_masks(self, batch):
        if self._mask is None:
            return None
        rows = [self._mask(t.observation) for traj in batch for t in traj.transitions]
        return np.stack(rows).astype(np.float64)

    def learner_step(self, batch) -> dict:
        masks = self._trajectory_masks(batch)
        if self.vtrace_cfg is not None:
            return vtrace_learner_update(batch, self.net, self.vtrace_cfg, self.opt, masks)
        return ppo_update(batch, self.net, self.ppo_cfg, self.opt, masks)

    def pretrain(self, steps: int) -> dict:
        if steps < 1:
            return {"updates": 0, "env_steps": 0}
        cfg = ActorLearnerConfig(
            actor_count=self._actors,
            segment_length=self._segment,
            queue_capacity=4 * self._actors,
            batch_segments=self._batch_segments,
        )
        return train_actor_learner(
            lambda idx: tasks.pretrain_family(self.task, base_seed=1000 + 8 * idx),
            self.make_policy,
            self.learner_step,
            self.net.param_values,
            cfg,
            BudgetTracker("steps", steps),
            self.seed,
        )

    def finetune(self, budget: BudgetTracker, segment_sink=None) -> dict:
        cfg = ActorLearnerConfig(
            actor_count=1,
            segment_length=self._segment,
            queue_capacity=4,
            batch_segments=self._batch_segments,
        )
        return train_synchronous(
            tasks.train_env(self.task),
            self.make_policy(),
            self.learner_step,
            self.net.param_values,
            cfg,
            budget,
            self.seed,
            segment_sink=segment_sink,
        )

    def evaluate(self, seed: int, eval_scale: float = 1.0) -> EvalResult:
        return evaluate_policy(self.task, self.make_policy(), seed, eval_scale)

    def checkpoint(self):
        return self.net.parameters()


# ---------------------------------------------------------------------------
# Sequence-model agents
# ---------------------------------------------------------------------------


class _MgdtAgent:
    """Shared trunk for the three sequence-model agents."""

    def __init__(self, tag: str, task: TaskSpec, seed: int, options: dict | None = None):
        self.tag = tag
        self.task = task
        self.seed = seed
        env = tasks.train_env(task)
        self.action_count = env.action_count
        grid = env.observation_shape
        tiles = patch_tiling(grid, task.patch_count)
        patch_dim = (grid[0] // tiles[0]) * (grid[1] // tiles[1])
        self.model_cfg = SeqModelConfig(
            action_count=self.action_count,
            patch_count=task.patch_count,
            patch_dim=patch_dim,
            return_bins=64,
            context=int(_opt(options, "agent.context")),
            blocks=2,
            heads=4,
            embed=64,
        )
        self.model = SequencePolicyModel(self.model_cfg, make_rng(seed, 13))
        self.opt = DecayedAdam(self.model.parameters())
        self.quantizer = task.quantizer(64)
        self.target_return = self.quantizer.r_max
        self.temperature = float(_opt(options, "agent.temperature"))
        self._ubr = int(_opt(options, "agent.updates_between_rollouts"))
        self._mask = tasks.mask_fn(task)
        self._use_mask = task.masked

    def _base_config(self) -> dict:
        c = self.model_cfg
        return {
            "agent.tag": self.tag,
            "agent.action_count": self.action_count,
            "model.blocks": c.blocks,
            "model.heads": c.heads,
            "model.embed": c.embed,
            "model.context": c.context,
            "model.return_bins": c.return_bins,
            "model.patch_count": c.patch_count,
            "model.patch_dim": c.patch_dim,
            "opt.kind": "decayed_adam",
            "opt.lr": self.opt.lr,
            "opt.weight_decay": self.opt.weight_decay,
            "quantizer.r_min": self.quantizer.r_min,
            "quantizer.r_max": self.quantizer.r_max,
            "agent.target_return": self.target_return,
            "agent.updates_between_rollouts": self._ubr,
        }

    def make_policy(self, temperature=None) -> SequencePolicy:
        t = self.temperature if temperature is None else temperature
        return SequencePolicy(
            self.model, self.quantizer, self.model_cfg.patch_count, self.target_return, t, self._use_mask
        )

    def pretrain(self, steps: int) -> dict:
        """Entropy-regularized behavior shaping on the seeded task family."""
        if steps < 1:
            return {"updates": 0, "env_steps": 0}
        family = tasks.pretrain_family(self.task, base_seed=1000)
        cfg = MaentConfig(
            beta=default_beta(self.action_count),
            context=self.model_cfg.context,
            updates_between_rollouts=self._ubr,
        )
        return finetune_mgdt(
            family,
            self.model,
            self.make_policy(),
            cfg,
            BudgetTracker("steps", steps),
            self.quantizer,
            make_rng(self.seed, 17),
            self.opt,
        )

    def evaluate(self, seed: int, eval_scale: float = 1.0) -> EvalResult:
        return evaluate_policy(self.task, self.make_policy(), seed, eval_scale)

    def checkpoint(self):
        return self.model.parameters()


class MgdtMaentAgent(_MgdtAgent):
    """Max-entropy sequence-model fine-tuning with the dual-adjusted bonus."""

    def __init__(self, tag, task, seed, options=None):
        super().__init__(tag, task, seed, options)
        self.maent_cfg = MaentConfig(
            beta=default_beta(self.action_count),
            context=self.model_cfg.context,
            updates_between_rollouts=self._ubr,
        )

    def config(self) -> dict:
        out = self._base_config()
        out.update(
            {
                "maent.beta": self.maent_cfg.beta,
                "maent.dual_lr": self.maent_cfg.dual_lr,
                "maent.batch": self.maent_cfg.batch,
                "maent.buffer_capacity": self.maent_cfg.buffer_capacity,
                "agent.temperature": self.temperature,
            }
        )
        return out

    def finetune(self, budget: BudgetTracker, segment_sink=None) -> dict:
        return finetune_mgdt(
            tasks.train_env(self.task),
            self.model,
            self.make_policy(),
            self.maent_cfg,
            budget,
            self.quantizer,
            make_rng(self.seed, 19),
            self.opt,
            segment_sink=segment_sink,
        )


class MgdtDqnAgent(_MgdtAgent):
    """Q-learning on the action-logit readout, epsilon-greedy collection."""

    def __init__(self, tag, task, seed, options=None):
        super().__init__(tag, task, seed, options)
        self._decay_horizon = 10_000  # replaced by the step budget when known
        self._buffer_capacity = 10_000

    def _dqn_cfg(self) -> DqnConfig:
        return DqnConfig(decay_horizon=self._decay_horizon)

    def config(self) -> dict:
        cfg = self._dqn_cfg()
        out = self._base_config()
        out.update(
            {
                "dqn.epsilon_start": cfg.epsilon_start,
                "dqn.epsilon_end": cfg.epsilon_end,
                "dqn.decay_horizon": cfg.decay_horizon,
                "dqn.gamma": cfg.gamma,
                "dqn.target_sync_interval": cfg.target_sync_interval,
                "dqn.batch": cfg.batch,
                "dqn.huber_delta": cfg.huber_delta,
                "dqn.buffer_capacity": self._buffer_capacity,
            }
        )
        return out

    def make_greedy_policy(self, dqn_cfg=None) -> GreedySequencePolicy:
        return GreedySequencePolicy(
            self.model, self.quantizer, self.model_cfg.patch_count, self.target_return, dqn_cfg, self._use_mask
        )

    def evaluate(self, seed: int, eval_scale: float = 1.0) -> EvalResult:
        return evaluate_policy(self.task, self.make_greedy_policy(), seed, eval_scale)

    def finetune(self, budget: BudgetTracker, segment_sink=None) -> dict:
        if budget.kind == "steps" and budget.amount >= 1:
            self._decay_horizon = int(budget.amount)
        cfg = self._dqn_cfg()
        env = tasks.train_env(self.task)
        policy = self.make_greedy_policy(cfg)
        target = SequencePolicyModel(self.model_cfg, make_rng(self.seed, 13))
        target.load_values(self.model.param_values())
        buffer = ReplayBuffer(self._buffer_capacity)
        rng = make_rng(self.seed, 23)
        budget.start()
        updates = env_steps = episodes = 0
        losses: list[float] = []
        while True:
            if updates % self._ubr == 0:
                traj = collect_episode(env, policy, rng, budget)
                if traj is None:
                    break
                buffer.add(traj)
                if segment_sink is not None:
                    segment_sink(Segment(traj, 0, updates))
                env_steps += traj.length
                episodes += int(traj.transitions[-1].terminal)
            if budget.kind == "seconds" and budget.exhausted:
                break
            samples = sample_qlearn_batch(
                buffer, cfg.batch, self.model_cfg.context, self.quantizer, self.model_cfg.patch_count, rng, self._mask
            )
            stats = window_dqn_update(self.model, target, samples, cfg, self.opt)
            losses.append(stats["loss"])
            updates += 1
            if updates % cfg.target_sync_interval == 0:
                target.load_values(self.model.param_values())
        return {
            "updates": updates,
            "episodes": episodes,
            "env_steps": env_steps,
            "loss": losses,
            "buffer_size": len(buffer),
            "budget_consumed": budget.consumed,
        }


class MgdtPpoAgent(_MgdtAgent):
    """On-policy clipped-surrogate fine-tuning, one episode per update."""

    def __init__(self, tag, task, seed, options=None):
        super().__init__(tag, task, seed, options)
        self.ppo_cfg = PpoConfig(surrogate_epochs=_epochs_for(task))

    def config(self) -> dict:
        c = self.ppo_cfg
        out = self._base_config()
        out.update(
            {
                "ppo.clip": c.clip,
                "ppo.surrogate_epochs": c.surrogate_epochs,
                "ppo.gamma": c.gamma,
                "ppo.gae_lambda": c.gae_lambda,
                "ppo.value_cost": c.value_cost,
                "ppo.entropy_cost": c.entropy_cost,
                "agent.temperature": self.temperature,
            }
        )
        return out

    def finetune(self, budget: BudgetTracker, segment_sink=None) -> dict:
        env = tasks.train_env(self.task)
        policy = self.make_policy()
        rng = make_rng(self.seed, 29)
        budget.start()
        updates = env_steps = episodes = 0
        stats: dict = {}
        while True:
            traj = collect_episode(env, policy, rng, budget)
            if traj is None:
                break
            if segment_sink is not None:
                segment_sink(Segment(traj, 0, updates))
            env_steps += traj.length
            episodes += int(traj.transitions[-1].terminal)
            if budget.kind == "seconds" and budget.exhausted:
                break
            stats = window_ppo_update(
                self.model,
                traj,
                self.ppo_cfg,
                self.opt,
                self.quantizer,
                self.model_cfg.patch_count,
                self._mask,
            )
            updates += 1
        return {
            "updates": updates,
            "episodes": episodes,
            "env_steps": env_steps,
            "last_stats": stats,
            "budget_consumed": budget.consumed,
        }


def build_agent(tag: str, task: TaskSpec, seed: int, options: dict | None = None):
    """Agent tag -> constructed agent."""
    if tag in ("IMPALA-V_TRACE", "IMPALA-PPO"):
        return ImpalaAgent(tag, task, seed, options)
    if tag == "MGDT-MAENT":
        return MgdtMaentAgent(tag, task, seed, options)
    if tag == "MGDT-DQN":
        return MgdtDqnAgent(tag, task, seed, options)
    if tag == "MGDT-PPO":
        return MgdtPpoAgent(tag, task, seed, options)
    raise ContractError(f"unknown agent tag {tag!r}; expected one of {AGENT_TAGS}")
