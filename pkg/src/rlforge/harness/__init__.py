"""Experiment harness: tasks, agents, protocol, statistics, reports, CLI."""

from .agents import AGENT_TAGS, EvalResult, build_agent, evaluate_policy
from .config import BUDGET_TAGS, TASK_NAMES, load_config, parse_config, validate_config
from .protocol import FRACTIONS, budget_amount, run_experiment, run_single
from .report import ReportRow, ReportTable, build_report_table, cles_matrix, emit_reports
from .stats import aggregate, aggregate_values, cles
from .tasks import TaskSpec, make_task

__all__ = [
    "AGENT_TAGS",
    "BUDGET_TAGS",
    "EvalResult",
    "FRACTIONS",
    "ReportRow",
    "ReportTable",
    "TASK_NAMES",
    "TaskSpec",
    "aggregate",
    "aggregate_values",
    "budget_amount",
    "build_agent",
    "build_report_table",
    "cles",
    "cles_matrix",
    "emit_reports",
    "evaluate_policy",
    "load_config",
    "make_task",
    "parse_config",
    "run_experiment",
    "run_single",
    "validate_config",
]
