"""The experiment protocol: pretrain, budgeted fine-tune, evaluate, persist.

One grid point is (agent tag, budget tag, seed) on a configured task.  The
fine-tuning budget is an exact fraction of the task's specialist budget:
zero_shot 0%, one_pct 1%, two_pct 2%.  Every grid point yields a RunRecord
persisted in its own run directory; a failing point is recorded with
status="partial" and the grid moves on.
"""

from __future__ import annotations

import time
import traceback
from pathlib import Path

from ..core import ContractError
from ..runtime import BudgetTracker, RunRecord, write_run_dir
from . import config as config_mod
from . import tasks
from .agents import EvalResult, build_agent
from .report import ReportTable, build_report_table, emit_reports
from .tasks import TaskSpec

FRACTIONS = {"zero_shot": 0.0, "one_pct": 0.01, "two_pct": 0.02}


def budget_amount(kind: str, specialist: float, tag: str):
    """Exact budget for a tag: steps/episodes round to int, seconds stay real."""
    if tag not in FRACTIONS:
        raise ContractError(f"unknown budget tag {tag!r}")
    amount = specialist * FRACTIONS[tag]
    if kind in ("steps", "episodes"):
        return int(round(amount))
    return float(amount)


def specialist_budget(task: TaskSpec, cfg: dict) -> float:
    """Configured override when non-negative, else the task's published value."""
    override = float(cfg.get("budget.specialist", -1.0))
    return override if override >= 0 else task.specialist_budget


def _agent_options(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k.startswith("agent.")}


def run_single(task: TaskSpec, tag: str, budget_tag: str, seed: int, cfg: dict, out_dir=None, evaluate=True) -> RunRecord:
    """One grid point: build, pretrain, fine-tune to budget, evaluate, persist.

    ``evaluate=False`` stops after fine-tuning (the CLI finetune verb); the
    record then carries no evaluation metrics.
    """
    agent = build_agent(tag, task, seed, _agent_options(cfg))
    specialist = specialist_budget(task, cfg)
    amount = budget_amount(task.budget_kind, specialist, budget_tag)
    eval_scale = float(cfg.get("eval.scale", 1.0))
    eval_seed = int(cfg.get("eval.seed_base", 0)) + seed
    pretrain_steps = int(cfg.get("pretrain.steps", 0))

    segments: list = []
    status = "complete"
    result = EvalResult()
    train_seconds = test_seconds = 0.0
    error = ""
    try:
        t0 = time.perf_counter()
        if pretrain_steps > 0:
            agent.pretrain(pretrain_steps)
        agent.finetune(BudgetTracker(task.budget_kind, amount), segment_sink=segments.append)
        train_seconds = time.perf_counter() - t0
        if evaluate:
            t1 = time.perf_counter()
            result = agent.evaluate(eval_seed, eval_scale)
            test_seconds = time.perf_counter() - t1
    except Exception:
        status = "partial"
        error = traceback.format_exc(limit=3)

    run_config = {
        "env.name": task.name,
        "env.seed": task.env_seed,
        "budget.tag": budget_tag,
        "budget.kind": task.budget_kind,
        "budget.amount": amount,
        "budget.specialist": specialist,
        "pretrain.steps": pretrain_steps,
        "eval.scale": eval_scale,
        "eval.seed_base": int(cfg.get("eval.seed_base", 0)),
    }
    run_config.update(agent.config())

    record = RunRecord(
        run_id=f"{task.name}-{tag}-{budget_tag}-s{seed}",
        agent=tag,
        environment=task.name,
        seed=seed,
        budget=budget_tag,
        budget_kind=task.budget_kind,
        budget_amount=amount,
        config=run_config,
        episode_returns=[float(x) for x in result.episode_returns],
        metrics=dict(result.metrics),
        censuses=dict(result.censuses),
        makespans=[float(x) for x in result.makespans],
        train_seconds=train_seconds,
        test_seconds=test_seconds,
        status=status,
        error=error,
    )
    if out_dir is not None:
        run_dir = Path(out_dir) / task.name / tag / budget_tag / f"seed{seed}"
        write_run_dir(run_dir, record, segments=segments, checkpoints={"final": agent.checkpoint()})
    return record


def run_experiment(cfg: dict, out_dir=None, *, agents=None, budgets=None, eval_scale=None, seed=None):
    """The full grid for one task config: agents x budgets x seeds.

    Returns (records, ReportTable); when ``out_dir`` is given, also writes
    run directories and the report files.  Points failing mid-run still
    persist their partial record.
    """
    cfg = dict(cfg)
    if eval_scale is not None:
        cfg["eval.scale"] = float(eval_scale)
    task = tasks.make_task(cfg["env.name"], int(cfg.get("env.seed", 0)))
    agent_tags = list(agents) if agents else config_mod.agent_list(cfg)
    budget_tags = list(budgets) if budgets else config_mod.budget_list(cfg)
    for tag in agent_tags:
        if tag not in config_mod.AGENT_TAGS:
            raise ContractError(f"unknown agent tag {tag!r}")
    for btag in budget_tags:
        if btag not in FRACTIONS:
            raise ContractError(f"unknown budget tag {btag!r}")
    if seed is not None:
        seeds = [int(seed)]
    else:
        base = int(cfg.get("env.seed", 0))
        seeds = [base + k for k in range(int(cfg.get("eval.runs", 5)))]

    records: list[RunRecord] = []
    for tag in agent_tags:
        for btag in budget_tags:
            for s in seeds:
                records.append(run_single(task, tag, btag, s, cfg, out_dir=out_dir))
    table = build_report_table(records)
    if out_dir is not None:
        emit_reports(records, out_dir)
    return records, table
