"""Command-line front end.

Verbs:
    pretrain   train agents on the task family only, saving checkpoints
    finetune   run the budget grid without evaluation
    evaluate   full protocol: pretrain, fine-tune, evaluate, report
    report     re-aggregate persisted run records into report files
    oracle     run the brute-force scheduling and effect-size self-checks

Failures exit nonzero after printing one machine-readable JSON error line
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..core import make_rng
from ..envs import jssp
from ..nn.checkpoint import save_params
from ..runtime import RunRecord
from . import config as config_mod
from . import protocol, tasks
from .report import emit_reports
from .stats import cles


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlforge", description="desk-scale generalist-agent workbench")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("pretrain", "finetune", "evaluate", "report", "oracle"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", type=str, default=None, help="key=value config file")
        sp.add_argument("--seed", type=int, default=None, help="single seed override")
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--eval-scale", type=float, default=None, help="evaluation budget multiplier")
        sp.add_argument("--agents", type=str, default=None, help="comma-separated agent tags")
        sp.add_argument("--budgets", type=str, default=None, help="comma-separated budget tags")
    return p


def _load_config(args) -> dict:
    if args.config is None:
        raise config_mod.ConfigError("this verb needs --config")
    cfg = config_mod.load_config(args.config)
    if args.eval_scale is not None:
        cfg["eval.scale"] = float(args.eval_scale)
    return cfg


def _split(value, fallback):
    if value is None:
        return fallback
    return [v.strip() for v in value.split(",") if v.strip()]


def _seeds(cfg, args):
    if args.seed is not None:
        return [int(args.seed)]
    base = int(cfg.get("env.seed", 0))
    return [base + k for k in range(int(cfg.get("eval.runs", 5)))]


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args)
    task = tasks.make_task(cfg["env.name"], int(cfg.get("env.seed", 0)))
    steps = int(cfg.get("pretrain.steps", 0))
    out = Path(args.out) if args.out else Path("runs")
    for tag in _split(args.agents, config_mod.agent_list(cfg)):
        for seed in _seeds(cfg, args):
            agent = protocol.build_agent(tag, task, seed, protocol._agent_options(cfg))
            stats = agent.pretrain(steps)
            dest = out / task.name / tag / "pretrain" / f"seed{seed}"
            dest.mkdir(parents=True, exist_ok=True)
            save_params(dest / "final.ckpt", agent.checkpoint())
            print(f"pretrained {tag} seed={seed} steps={stats.get('env_steps', 0)} -> {dest}")
    return 0


def _cmd_finetune(args) -> int:
    cfg = _load_config(args)
    task = tasks.make_task(cfg["env.name"], int(cfg.get("env.seed", 0)))
    out = args.out or "runs"
    for tag in _split(args.agents, config_mod.agent_list(cfg)):
        for btag in _split(args.budgets, config_mod.budget_list(cfg)):
            for seed in _seeds(cfg, args):
                rec = protocol.run_single(task, tag, btag, seed, cfg, out_dir=out, evaluate=False)
                print(f"finetuned {rec.run_id} status={rec.status} budget={rec.budget_amount}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    out = args.out or "runs"
    records, table = protocol.run_experiment(
        cfg,
        out,
        agents=_split(args.agents, None),
        budgets=_split(args.budgets, None),
        eval_scale=args.eval_scale,
        seed=args.seed,
    )
    bad = [r.run_id for r in records if r.status != "complete"]
    for rec in records:
        print(f"run {rec.run_id} status={rec.status}")
    print(f"wrote {len(records)} records and {len(table)} report rows under {out}")
    return 1 if bad else 0


def _cmd_report(args) -> int:
    if args.out is None:
        raise config_mod.ConfigError("report needs --out pointing at a run directory tree")
    root = Path(args.out)
    paths = sorted(root.rglob("run_record.json"))
    if not paths:
        raise config_mod.ConfigError(f"no run_record.json files under {root}")
    records = [RunRecord.from_json(p.read_text(encoding="utf-8")) for p in paths]
    written = emit_reports(records, root)
    for w in written:
        print(f"wrote {w}")
    return 0


def _cmd_oracle(args) -> int:
    failures = 0

    def check(name: str, ok: bool, detail: str = ""):
        nonlocal failures
        line = f"{'PASS' if ok else 'FAIL'} {name}"
        if detail:
            line += f" ({detail})"
        print(line)
        failures += 0 if ok else 1

    known = jssp.parse_instance("2 2\n0 3 1 2\n1 2 0 4\n")
    opt = jssp.brute_force_optimal(known)
    check("jssp.known_2x2_optimum", opt.makespan == 7, f"makespan={opt.makespan}")

    rng = make_rng(args.seed if args.seed is not None else 0, 997)
    dominated = True
    for k in range(25):
        inst = jssp.generate_taillard(3, 3, 1, 9, seed=int(rng.integers(1 << 30)))
        best = jssp.brute_force_optimal(inst).makespan
        for rule in ("SPT", "MWR"):
            dominated &= best <= jssp.classic_pdr(inst, rule).makespan
        for _ in range(4):
            dominated &= best <= jssp.random_dispatch(inst, rng).makespan
    check("jssp.brute_force_dominates", dominated)

    sym = exact = True
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(1, 8))).round(1).tolist()
        b = rng.normal(size=int(rng.integers(1, 8))).round(1).tolist()
        c_ab, c_ba = cles(a, b), cles(b, a)
        sym &= abs(c_ab + c_ba - 1.0) == 0.0
        wins = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)
        exact &= c_ab == wins / (len(a) * len(b))
    check("cles.symmetry", sym)
    check("cles.exhaustive_match", exact)

    return 1 if failures else 0


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except Exception as exc:  # one machine-readable line, nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
