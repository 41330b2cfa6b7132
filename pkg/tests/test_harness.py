"""Harness tests: config, statistics, tasks, agents, protocol, reports, CLI."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from rlforge.core import ConfigError, ContractError, Trajectory, Transition, make_rng
from rlforge.harness import (
    aggregate_values,
    budget_amount,
    build_report_table,
    cles,
    cles_matrix,
    emit_reports,
    evaluate_policy,
    make_task,
    parse_config,
    run_experiment,
    run_single,
)
from rlforge.harness import config as config_mod
from rlforge.harness import tasks
from rlforge.harness.agents import (
    GreedySequencePolicy,
    NetPolicy,
    SequencePolicy,
    _successor_window,
    build_agent,
    step_windows,
)
from rlforge.harness.cli import main as cli_main
from rlforge.harness.protocol import FRACTIONS, specialist_budget
from rlforge.harness.report import render_csv, render_text
from rlforge.harness.stats import aggregate, metric_values
from rlforge.learners import DqnConfig
from rlforge.runtime import BudgetTracker, RunRecord
from rlforge.seq.model import SeqModelConfig, SequencePolicyModel
from rlforge.seq.tokens import ReturnQuantizer


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class TestConfig:
    def test_defaults_fill_in(self):
        cfg = parse_config("env.name = pacgrid\n")
        assert cfg["env.seed"] == 0
        assert cfg["eval.runs"] == 5
        assert cfg["agent.tags"] == ",".join(config_mod.AGENT_TAGS)
        assert cfg["budget.specialist"] == -1.0

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nenv.name = blockmaze  # trailing\nenv.seed = 3\n")
        assert cfg["env.name"] == "blockmaze"
        assert cfg["env.seed"] == 3

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("env.name = pacgrid\nenv.nmae = x\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("env.name = pacgrid\nenv.name = blockmaze\n")

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="env.name"):
            parse_config("env.seed = 1\n")

    def test_bad_value_type(self):
        with pytest.raises(ConfigError, match="cannot parse"):
            parse_config("env.name = pacgrid\nenv.seed = many\n")

    def test_bad_task_and_tags(self):
        with pytest.raises(ConfigError, match="env.name"):
            parse_config("env.name = chess\n")
        with pytest.raises(ConfigError, match="agent tag"):
            parse_config("env.name = pacgrid\nagent.tags = MGDT-A2C\n")
        with pytest.raises(ConfigError, match="budget tag"):
            parse_config("env.name = pacgrid\nbudget.tags = three_pct\n")

    def test_positivity(self):
        with pytest.raises(ConfigError, match="eval.scale"):
            parse_config("env.name = pacgrid\neval.scale = 0\n")
        with pytest.raises(ConfigError, match="agent.context"):
            parse_config("env.name = pacgrid\nagent.context = 0\n")


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


class TestStats:
    def test_cles_known_cases(self):
        assert cles([2.0, 3.0], [1.0, 1.0]) == 1.0
        assert cles([1.0, 1.0], [2.0, 3.0]) == 0.0
        assert cles([1.0, 2.0], [1.0, 2.0]) == 0.5
        assert cles([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) == 0.5

    def test_cles_matches_exhaustive_enumeration(self):
        rng = make_rng(5, 1)
        for _ in range(300):
            a = rng.integers(0, 5, size=int(rng.integers(1, 7))).astype(float).tolist()
            b = rng.integers(0, 5, size=int(rng.integers(1, 7))).astype(float).tolist()
            wins = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)
            assert cles(a, b) == wins / (len(a) * len(b))
            assert cles(a, b) + cles(b, a) == 1.0

    def test_cles_empty_rejected(self):
        with pytest.raises(ContractError):
            cles([], [1.0])

    def test_aggregate_worked_example(self):
        mean, std, median = aggregate_values([1.0, 2.0, 3.0, 4.0])
        assert mean == 2.5
        assert std == math.sqrt(1.25)
        assert median == 2.5

    def test_aggregate_odd_median(self):
        assert aggregate_values([5.0, 1.0, 3.0])[2] == 3.0

    def test_aggregate_empty_rejected(self):
        with pytest.raises(ContractError):
            aggregate_values([])

    def test_metric_values_timing_fallback(self):
        rec = _record("jssp6x6", "IMPALA-PPO", "zero_shot", 0, {"makespan": 9.0}, train_seconds=2.5)
        assert metric_values([rec], "makespan") == [9.0]
        assert metric_values([rec], "train_seconds") == [2.5]
        with pytest.raises(ContractError):
            metric_values([rec], "bugs")
        assert aggregate([rec, rec], "makespan") == (9.0, 0.0, 9.0)


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


class TestTasks:
    def test_task_table(self):
        bm = make_task("blockmaze")
        assert (bm.budget_kind, bm.specialist_budget) == ("seconds", 43200.0)
        assert (bm.eval_kind, bm.eval_amount) == ("steps", 300_000)
        assert bm.return_range == (-400.0, 100.0)
        pg = make_task("pacgrid")
        assert (pg.budget_kind, pg.specialist_budget) == ("episodes", 1000)
        assert pg.return_range == (0.0, 444.0)
        j6 = make_task("jssp6x6")
        assert (j6.budget_kind, j6.specialist_budget) == ("steps", 36_000)
        assert (j6.eval_kind, j6.eval_amount) == ("instances", 100)
        assert j6.return_range[1] == 0.0 and j6.return_range[0] < 0
        j30 = make_task("jssp30x20")
        assert j30.specialist_budget == 6_000_000

    def test_unknown_task(self):
        with pytest.raises(ConfigError):
            make_task("sokoban")

    def test_quantizer_ranges(self):
        q = make_task("pacgrid").quantizer()
        assert (q.r_min, q.r_max) == (0.0, 444.0)
        qj = make_task("jssp6x6").quantizer()
        assert qj.r_max == 0.0

    def test_patch_counts_divide_observations(self):
        from rlforge.seq.tokens import patch_tiling

        for name in tasks.TASK_NAMES if hasattr(tasks, "TASK_NAMES") else config_mod.TASK_NAMES:
            task = make_task(name)
            env = tasks.train_env(task)
            tiles = patch_tiling(env.observation_shape, task.patch_count)
            assert tiles[0] * tiles[1] == task.patch_count

    def test_reseeding_env_is_deterministic(self):
        t = make_task("jssp6x6")
        a, b = tasks.train_env(t), tasks.train_env(t)
        oa, ob = a.reset(), b.reset()
        assert np.array_equal(oa, ob)
        a.reset()
        b.reset()
        # second reset draws the next seed in the stream, same on both
        assert np.array_equal(a.reset(), b.reset())

    def test_family_env_cycles_variants(self):
        t = make_task("blockmaze")
        fam = tasks.pretrain_family(t, base_seed=10)
        first = [fam.reset() for _ in range(8)]
        second = [fam.reset() for _ in range(8)]
        for x, y in zip(first, second):
            assert np.array_equal(x, y)
        assert not all(np.array_equal(first[0], o) for o in first[1:])

    def test_family_env_jssp_members_draw_fresh_instances(self):
        t = make_task("jssp6x6")
        fam = tasks.pretrain_family(t, base_seed=10)
        first = [fam.reset() for _ in range(8)]
        # same member, next cycle: a new instance from that member's stream
        ninth = fam.reset()
        assert not np.array_equal(first[0], ninth)

    def test_mask_fn(self):
        assert tasks.mask_fn(make_task("blockmaze")) is None
        assert tasks.mask_fn(make_task("pacgrid")) is None
        t = make_task("jssp6x6")
        fn = tasks.mask_fn(t)
        env = tasks.train_env(t)
        obs = env.reset()
        assert np.array_equal(fn(obs), env.valid_actions())


# ---------------------------------------------------------------------------
# acting policies and window glue
# ---------------------------------------------------------------------------


def _tiny_model(action_count=3, context=3):
    cfg = SeqModelConfig(
        action_count=action_count, patch_count=1, patch_dim=4, return_bins=8, context=context, blocks=1, heads=2, embed=8
    )
    return SequencePolicyModel(cfg, make_rng(0, 3))


def _toy_trajectory(n=5, action_count=3):
    rng = make_rng(9, 4)
    ts = []
    for t in range(n):
        ts.append(
            Transition(
                observation=rng.normal(size=(2, 2)),
                action=int(rng.integers(action_count)),
                reward=float(rng.integers(-1, 2)),
                next_observation=rng.normal(size=(2, 2)),
                terminal=t == n - 1,
                behavior_log_prob=-1.0,
            )
        )
    return Trajectory(tuple(ts))


class TestPolicies:
    def test_net_policy_respects_mask(self):
        policy = NetPolicy(4, 3)
        rng = make_rng(0, 5)
        mask = np.array([0.0, 1.0, 0.0])
        for _ in range(20):
            action, logp = policy.act(np.zeros((2, 2)), mask, rng)
            assert action == 1
            assert logp <= 0.0

    def test_sequence_policy_return_to_go_decrements(self):
        model = _tiny_model()
        q = ReturnQuantizer(-10.0, 10.0, 8)
        policy = SequencePolicy(model, q, 1, target_return=10.0)
        rng = make_rng(1, 6)
        obs = np.zeros((2, 2))
        policy.begin_episode()
        a, logp = policy.act(obs, np.ones(3), rng)
        assert 0 <= a < 3 and logp <= 0.0
        policy.observe(Transition(obs, a, 4.0, obs, False, logp))
        assert policy._ret == 6.0
        policy.observe(Transition(obs, a, -1.0, obs, False, logp))
        assert policy._ret == 7.0

    def test_greedy_policy_epsilon_schedule(self):
        model = _tiny_model()
        q = ReturnQuantizer(-10.0, 10.0, 8)
        # eps pinned to 1: all draws uniform over the two valid actions
        cfg = DqnConfig(epsilon_start=1.0, epsilon_end=1.0, decay_horizon=5)
        policy = GreedySequencePolicy(model, q, 1, 10.0, dqn_cfg=cfg)
        rng = make_rng(2, 7)
        mask = np.array([1.0, 0.0, 1.0])
        seen = set()
        for _ in range(40):
            a, logp = policy.act(np.zeros((2, 2)), mask, rng)
            assert a in (0, 2)
            assert logp == pytest.approx(math.log(0.5))
            seen.add(a)
        assert seen == {0, 2}

    def test_greedy_policy_pure_greedy_when_unconfigured(self):
        model = _tiny_model()
        q = ReturnQuantizer(-10.0, 10.0, 8)
        policy = GreedySequencePolicy(model, q, 1, 10.0)
        rng = make_rng(3, 8)
        a1, logp = policy.act(np.zeros((2, 2)), np.ones(3), rng)
        a2, _ = GreedySequencePolicy(model, q, 1, 10.0).act(np.zeros((2, 2)), np.ones(3), rng)
        assert a1 == a2
        assert logp == 0.0

    def test_step_windows_match_manual_encoding(self):
        traj = _toy_trajectory(5)
        q = ReturnQuantizer(-10.0, 10.0, 8)
        windows = step_windows(traj, 3, q, 1)
        assert len(windows) == 5
        rewards = [t.reward for t in traj.transitions]
        # window at t=4 holds steps 2..4; its return tokens quantize the
        # trajectory suffix sums, not a restarted target
        rtg4 = sum(rewards[4:])
        assert windows[4].returns[-1] == q.quantize(rtg4)
        assert windows[0].mask.tolist() == [0.0, 0.0, 1.0]

    def test_successor_window_matches_acting_window(self):
        """TD bootstrapping must see exactly what the policy would see."""
        traj = _toy_trajectory(4)
        q = ReturnQuantizer(-10.0, 10.0, 8)
        model = _tiny_model()
        policy = SequencePolicy(model, q, 1, target_return=float(sum(t.reward for t in traj.transitions)))
        policy.begin_episode()
        for t, tr in enumerate(traj.transitions[:-1]):
            policy.observe(tr)
            succ = _successor_window(traj, t, 3, q, 1)
            acting = policy._window(tr.next_observation)
            assert np.array_equal(succ.patches, acting.patches)
            assert np.array_equal(succ.returns, acting.returns)
            assert np.array_equal(succ.mask, acting.mask)


# ---------------------------------------------------------------------------
# evaluation protocols
# ---------------------------------------------------------------------------


class TestEvaluatePolicy:
    def test_blockmaze_step_budget_trims_exactly(self):
        task = make_task("blockmaze")
        agent = build_agent("IMPALA-V_TRACE", task, seed=0)
        result = agent.evaluate(seed=0, eval_scale=37 / 300_000)
        assert result.metrics["env_steps"] == 37.0
        assert set(result.censuses) == {
            "distinct_exploratory",
            "distinct_invalid_location",
            "triggers_exploratory",
            "triggers_invalid_location",
        }

    def test_pacgrid_episode_budget(self):
        task = make_task("pacgrid")
        agent = build_agent("IMPALA-PPO", task, seed=0)
        result = agent.evaluate(seed=1, eval_scale=0.002)
        assert len(result.episode_returns) == 2
        assert result.metrics["episodes"] == 2.0
        assert "entries_gate_A" in result.metrics and "distinct_gates" in result.metrics

    def test_jssp_instances_fixed_across_policies(self):
        task = make_task("jssp6x6")
        r1 = build_agent("IMPALA-V_TRACE", task, seed=0).evaluate(seed=3, eval_scale=0.02)
        r2 = build_agent("IMPALA-PPO", task, seed=1).evaluate(seed=3, eval_scale=0.02)
        assert len(r1.makespans) == len(r2.makespans) == 2
        assert r1.metrics["makespan"] == pytest.approx(float(np.mean(r1.makespans)))
        # both policies solved the same two generated instances
        t = make_task("jssp6x6")
        env = tasks.eval_env(t)
        from rlforge.harness.agents import _instance_seed

        first = env.reset(seed=_instance_seed(t, 0))
        again = env.reset(seed=_instance_seed(t, 0))
        assert np.array_equal(first, again)

    def test_bad_scale_rejected(self):
        task = make_task("jssp6x6")
        agent = build_agent("IMPALA-V_TRACE", task, seed=0)
        with pytest.raises(ContractError):
            agent.evaluate(seed=0, eval_scale=0.0)


# ---------------------------------------------------------------------------
# report construction
# ---------------------------------------------------------------------------


def _record(env, agent, budget, seed, metrics, train_seconds=1.0, test_seconds=0.5):
    return RunRecord(
        run_id=f"{env}-{agent}-{budget}-s{seed}",
        agent=agent,
        environment=env,
        seed=seed,
        budget=budget,
        budget_kind="steps",
        budget_amount=10,
        config={"env.name": env, "agent.tag": agent},
        episode_returns=[1.0],
        metrics=metrics,
        train_seconds=train_seconds,
        test_seconds=test_seconds,
    )


def _toy_records():
    out = []
    for seed, (ma, mb) in enumerate([(3.0, 4.0), (5.0, 2.0), (4.0, 4.0)]):
        out.append(_record("jssp6x6", "AGENT-A", "one_pct", seed, {"makespan": ma}))
        out.append(_record("jssp6x6", "AGENT-B", "one_pct", seed, {"makespan": mb}))
    return out


class TestReport:
    def test_table_rows_and_aggregates(self):
        table = build_report_table(_toy_records())
        row = table.cell("jssp6x6", "AGENT-A", "one_pct", "makespan")
        assert (row.mean, row.median, row.runs) == (4.0, 4.0, 3)
        assert row.std == pytest.approx(math.sqrt(2.0 / 3.0))
        # timing rows always present
        assert table.cell("jssp6x6", "AGENT-B", "one_pct", "train_seconds").mean == 1.0

    def test_missing_cell_rejected(self):
        table = build_report_table(_toy_records())
        with pytest.raises(ContractError):
            table.cell("jssp6x6", "AGENT-A", "two_pct", "makespan")

    def test_csv_header_and_shape(self):
        text = render_csv(build_report_table(_toy_records()), "jssp6x6")
        lines = text.strip().split("\n")
        assert lines[0] == "agent,budget,metric,mean,std,median"
        assert lines[1].startswith("AGENT-A,one_pct,")
        assert len(lines) == 1 + 2 * 3  # two agents x (makespan + 2 timings)

    def test_cles_matrix_two_agents_is_1x1(self):
        records = _toy_records()
        rows, cols, matrix = cles_matrix(records, "jssp6x6", "one_pct", "makespan")
        assert (rows, cols) == (["AGENT-A"], ["AGENT-B"])
        assert matrix.shape == (1, 1)
        assert matrix[0, 0] == cles([3.0, 5.0, 4.0], [4.0, 2.0, 4.0])

    def test_cles_matrix_needs_two_agents(self):
        records = [r for r in _toy_records() if r.agent == "AGENT-A"]
        with pytest.raises(ContractError):
            cles_matrix(records, "jssp6x6", "one_pct", "makespan")

    def test_emit_reports_idempotent(self, tmp_path):
        records = _toy_records()
        first = emit_reports(records, tmp_path / "a")
        emit_reports(records, tmp_path / "b")
        assert first, "nothing written"
        for p in first:
            twin = tmp_path / "b" / p.name
            assert p.read_bytes() == twin.read_bytes()

    def test_text_table_mentions_environment(self):
        text = render_text(build_report_table(_toy_records()), "jssp6x6")
        assert text.startswith("environment: jssp6x6")
        assert "AGENT-B" in text


# ---------------------------------------------------------------------------
# protocol
# ---------------------------------------------------------------------------


MICRO_CFG = {
    "env.name": "jssp6x6",
    "env.seed": 0,
    "agent.tags": "IMPALA-V_TRACE,MGDT-MAENT",
    "budget.tags": "zero_shot,one_pct,two_pct",
    "agent.actors": 2,
    "agent.segment_length": 20,
    "agent.batch_segments": 4,
    "agent.updates_between_rollouts": 2,
    "agent.context": 4,
    "agent.temperature": 1.0,
    "budget.specialist": 400.0,
    "pretrain.steps": 0,
    "eval.scale": 0.01,
    "eval.runs": 2,
    "eval.seed_base": 0,
}


@pytest.fixture(scope="module")
def micro_grid(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    records, table = run_experiment(MICRO_CFG, out)
    return records, table, out


class TestProtocol:
    def test_budget_fractions_exact(self):
        assert budget_amount("episodes", 1000, "zero_shot") == 0
        assert budget_amount("episodes", 1000, "one_pct") == 10
        assert budget_amount("episodes", 1000, "two_pct") == 20
        assert budget_amount("steps", 36_000, "one_pct") == 360
        assert budget_amount("steps", 6_000_000, "two_pct") == 120_000
        assert budget_amount("seconds", 43_200, "one_pct") == 432.0
        assert budget_amount("seconds", 43_200, "two_pct") == 864.0
        with pytest.raises(ContractError):
            budget_amount("steps", 100, "three_pct")

    def test_specialist_override(self):
        task = make_task("jssp6x6")
        assert specialist_budget(task, {"budget.specialist": -1.0}) == 36_000
        assert specialist_budget(task, {"budget.specialist": 500.0}) == 500.0

    def test_grid_budgets_are_exact_fractions(self, micro_grid):
        records, _, _ = micro_grid
        assert len(records) == 2 * 3 * 2  # agents x budgets x seeds
        for rec in records:
            assert rec.status == "complete"
            frac = FRACTIONS[rec.budget]
            assert rec.budget_amount == int(round(400.0 * frac))
            assert rec.config["budget.amount"] == rec.budget_amount

    def test_fingerprint_shared_across_seeds_only(self, micro_grid):
        records, _, _ = micro_grid
        by_key = {}
        for rec in records:
            by_key.setdefault((rec.agent, rec.budget), set()).add(rec.fingerprint)
        for prints in by_key.values():
            assert len(prints) == 1
        # different budget -> different decided budget.amount -> new fingerprint
        assert by_key[("IMPALA-V_TRACE", "zero_shot")] != by_key[("IMPALA-V_TRACE", "one_pct")]

    def test_report_table_shape(self, micro_grid):
        _, table, _ = micro_grid
        row = table.cell("jssp6x6", "MGDT-MAENT", "one_pct", "makespan")
        assert row.runs == 2
        assert isinstance(row.mean, float) and isinstance(row.std, float) and isinstance(row.median, float)

    def test_run_directories_complete(self, micro_grid):
        _, _, out = micro_grid
        run = out / "jssp6x6" / "MGDT-MAENT" / "two_pct" / "seed1"
        assert (run / "run_record.json").exists()
        assert (run / "config.fingerprint").exists()
        assert (run / "checkpoints" / "final.ckpt").exists()
        rec = RunRecord.from_json((run / "run_record.json").read_text())
        assert rec.seed == 1 and rec.budget == "two_pct"
        first_line = (run / "config.fingerprint").read_text().splitlines()[0]
        assert first_line == rec.fingerprint
        # fine-tuned runs log their training transitions
        jsonl = run / "actor_00.jsonl"
        assert jsonl.exists()
        lines = jsonl.read_text().strip().split("\n")
        assert len(lines) == 8  # two_pct of 400 steps
        parsed = json.loads(lines[0])
        assert {"action", "reward", "observation", "behavior_log_prob"} <= set(parsed)

    def test_reports_emitted(self, micro_grid):
        _, _, out = micro_grid
        assert (out / "report_jssp6x6.csv").exists()
        assert (out / "report_jssp6x6.txt").exists()
        assert (out / "cles_jssp6x6.csv").exists()
        header = (out / "report_jssp6x6.csv").read_text().splitlines()[0]
        assert header == "agent,budget,metric,mean,std,median"

    def test_partial_failure_persists_record(self, tmp_path, monkeypatch):
        task = make_task("jssp6x6")

        def boom(self, budget, segment_sink=None):
            raise RuntimeError("induced learner crash")

        from rlforge.harness.agents import ImpalaAgent

        monkeypatch.setattr(ImpalaAgent, "finetune", boom)
        rec = run_single(task, "IMPALA-V_TRACE", "one_pct", 0, MICRO_CFG, out_dir=tmp_path)
        assert rec.status == "partial"
        assert "induced learner crash" in rec.error
        stored = RunRecord.from_json(
            (tmp_path / "jssp6x6" / "IMPALA-V_TRACE" / "one_pct" / "seed0" / "run_record.json").read_text()
        )
        assert stored.status == "partial"

    def test_unknown_tags_rejected(self):
        with pytest.raises(ContractError):
            run_experiment(MICRO_CFG, None, agents=["MGDT-SARSA"], seed=0)
        with pytest.raises(ContractError):
            run_experiment(MICRO_CFG, None, budgets=["half"], seed=0)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class TestCli:
    def test_oracle_passes(self, capsys):
        assert cli_main(["oracle"]) == 0
        out = capsys.readouterr().out
        assert "PASS jssp.known_2x2_optimum" in out
        assert "FAIL" not in out

    def test_missing_config_is_machine_readable(self, capsys):
        assert cli_main(["evaluate"]) == 1
        err = capsys.readouterr().err.strip()
        payload = json.loads(err)
        assert payload["error"] == "ConfigError"

    def test_evaluate_report_round_trip(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.ini"
        cfg.write_text(
            "env.name = jssp6x6\n"
            "agent.tags = IMPALA-V_TRACE\n"
            "budget.tags = zero_shot,one_pct\n"
            "budget.specialist = 200\n"
            "agent.batch_segments = 4\n"
            "eval.scale = 0.01\n"
            "eval.runs = 1\n"
        )
        out = tmp_path / "runs"
        assert cli_main(["evaluate", "--config", str(cfg), "--out", str(out)]) == 0
        report = out / "report_jssp6x6.csv"
        before = report.read_bytes()
        assert cli_main(["report", "--out", str(out)]) == 0
        assert report.read_bytes() == before

    def test_agents_flag_filters(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.ini"
        cfg.write_text(
            "env.name = jssp6x6\nbudget.specialist = 100\nagent.batch_segments = 2\neval.scale = 0.01\neval.runs = 1\n"
        )
        rc = cli_main(
            [
                "finetune",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "ft"),
                "--agents",
                "IMPALA-PPO",
                "--budgets",
                "one_pct",
                "--seed",
                "7",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "jssp6x6-IMPALA-PPO-one_pct-s7" in out
        rec = RunRecord.from_json(
            (tmp_path / "ft" / "jssp6x6" / "IMPALA-PPO" / "one_pct" / "seed7" / "run_record.json").read_text()
        )
        assert rec.metrics == {}  # finetune verb skips evaluation
        assert rec.budget_amount == 1
