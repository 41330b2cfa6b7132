"""Aggregation of run records into tables, CSVs, and CLES matrices.

All emission is deterministic: rows sort on (environment, agent, budget,
metric), floats render through repr, and re-running on the same records
reproduces every output byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import ContractError
from ..runtime import RunRecord, TIMING_FIELDS
from .stats import aggregate_values, cles

BUDGET_ORDER = {"zero_shot": 0, "one_pct": 1, "two_pct": 2, "custom": 3}


def _budget_rank(tag: str) -> int:
    return BUDGET_ORDER.get(tag, len(BUDGET_ORDER))


@dataclass(frozen=True)
class ReportRow:
    environment: str
    agent: str
    budget: str
    metric: str
    mean: float
    std: float
    median: float
    runs: int


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def environments(self) -> tuple[str, ...]:
        seen = sorted({r.environment for r in self.rows})
        return tuple(seen)

    def cell(self, environment: str, agent: str, budget: str, metric: str) -> ReportRow:
        for r in self.rows:
            if (r.environment, r.agent, r.budget, r.metric) == (environment, agent, budget, metric):
                return r
        raise ContractError(f"no row for {(environment, agent, budget, metric)}")

    def select(self, **filters) -> tuple[ReportRow, ...]:
        out = []
        for r in self.rows:
            if all(getattr(r, k) == v for k, v in filters.items()):
                out.append(r)
        return tuple(out)


def _metric_values(group: list[RunRecord], metric: str) -> list[float]:
    if metric in TIMING_FIELDS:
        return [float(getattr(rec, metric)) for rec in group]
    return [float(rec.metrics[metric]) for rec in group if metric in rec.metrics]


def build_report_table(records) -> ReportTable:
    """Aggregate runs into one row per (environment, agent, budget, metric)."""
    groups: dict[tuple[str, str, str], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.environment, rec.agent, rec.budget), []).append(rec)

    rows: list[ReportRow] = []
    for (env, agent, budget), group in groups.items():
        metrics = sorted({m for rec in group for m in rec.metrics}) + list(TIMING_FIELDS)
        for metric in metrics:
            values = _metric_values(group, metric)
            if not values:
                continue
            mean, std, median = aggregate_values(values)
            rows.append(ReportRow(env, agent, budget, metric, mean, std, median, len(values)))
    rows.sort(key=lambda r: (r.environment, r.agent, _budget_rank(r.budget), r.metric))
    return ReportTable(tuple(rows))


# ---------------------------------------------------------------------------
# CLES matrices
# ---------------------------------------------------------------------------


def cles_matrix(records, environment: str, budget: str, metric: str):
    """Pairwise effect sizes for one metric slice.

    Returns (row_agents, col_agents, matrix) where matrix[i, j] holds
    cles(row_agents[i], col_agents[j]) for ordered pairs (row index strictly
    before column agent in the sorted agent list) and NaN elsewhere.  Two
    agents give a 1x1 matrix.
    """
    by_agent: dict[str, list[float]] = {}
    for rec in records:
        if rec.environment == environment and rec.budget == budget and metric in rec.metrics:
            by_agent.setdefault(rec.agent, []).append(float(rec.metrics[metric]))
    agents = sorted(by_agent)
    if len(agents) < 2:
        raise ContractError(f"need at least two agents for a CLES matrix, have {agents}")
    rows, cols = agents[:-1], agents[1:]
    matrix = np.full((len(rows), len(cols)), np.nan)
    for i, a in enumerate(rows):
        for j, b in enumerate(cols):
            if j >= i:  # unordered pairs, each once
                matrix[i, j] = cles(by_agent[a], by_agent[b])
    return rows, cols, matrix


def _cles_lines(records, environment: str) -> list[str]:
    recs = [r for r in records if r.environment == environment]
    budgets = sorted({r.budget for r in recs}, key=_budget_rank)
    lines = ["budget,metric,agent_a,agent_b,cles"]
    for budget in budgets:
        slice_recs = [r for r in recs if r.budget == budget]
        metrics = sorted({m for r in slice_recs for m in r.metrics})
        agents = sorted({r.agent for r in slice_recs})
        if len(agents) < 2:
            continue
        for metric in metrics:
            by_agent = {
                a: [float(r.metrics[metric]) for r in slice_recs if r.agent == a and metric in r.metrics]
                for a in agents
            }
            for i, a in enumerate(agents):
                for b in agents[i + 1 :]:
                    if by_agent[a] and by_agent[b]:
                        lines.append(f"{budget},{metric},{a},{b},{cles(by_agent[a], by_agent[b])!r}")
    return lines


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def render_csv(table: ReportTable, environment: str) -> str:
    lines = ["agent,budget,metric,mean,std,median"]
    for r in table.rows:
        if r.environment == environment:
            lines.append(f"{r.agent},{r.budget},{r.metric},{r.mean!r},{r.std!r},{r.median!r}")
    return "\n".join(lines) + "\n"


def render_text(table: ReportTable, environment: str) -> str:
    header = ("agent", "budget", "metric", "mean", "std", "median", "runs")
    body = [
        (r.agent, r.budget, r.metric, f"{r.mean:.6g}", f"{r.std:.6g}", f"{r.median:.6g}", str(r.runs))
        for r in table.rows
        if r.environment == environment
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    out = [f"environment: {environment}"]
    out.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    out.append("  ".join("-" * w for w in widths))
    for row in body:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(out) + "\n"


def emit_reports(records, out_dir) -> list[Path]:
    """Write per-environment CSV, text table, and CLES CSV; returns paths."""
    records = list(records)
    table = build_report_table(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for env in table.environments or _record_envs(records):
        csv_path = out / f"report_{env}.csv"
        csv_path.write_text(render_csv(table, env), encoding="utf-8")
        txt_path = out / f"report_{env}.txt"
        txt_path.write_text(render_text(table, env), encoding="utf-8")
        written.extend([csv_path, txt_path])
        lines = _cles_lines(records, env)
        if len(lines) > 1:
            cles_path = out / f"cles_{env}.csv"
            cles_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(cles_path)
    return written


def _record_envs(records) -> tuple[str, ...]:
    return tuple(sorted({r.environment for r in records}))
