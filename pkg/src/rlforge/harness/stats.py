"""Effect sizes and descriptive aggregation for run metrics."""

import math

from ..core import ContractError
from ..runtime import RunRecord


def cles(sample_a, sample_b) -> float:
    """Common-language effect size by exhaustive pair enumeration.

    The probability that a random draw from ``sample_a`` exceeds one from
    ``sample_b``; tied pairs are credited half, so cles(A, B) + cles(B, A)
    is exactly 1.
    """
    a = [float(x) for x in sample_a]
    b = [float(x) for x in sample_b]
    if not a or not b:
        raise ContractError("cles needs two nonempty samples")
    wins = 0.0
    for x in a:
        for y in b:
            if x > y:
                wins += 1.0
            elif x == y:
                wins += 0.5
    return wins / (len(a) * len(b))


def aggregate_values(values) -> tuple[float, float, float]:
    """(mean, population std, median) with the midpoint rule for even n."""
    vals = [float(v) for v in values]
    if not vals:
        raise ContractError("aggregate needs at least one value")
    n = len(vals)
    mean = math.fsum(vals) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / n)
    ordered = sorted(vals)
    mid = n // 2
    median = ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2.0
    return mean, std, median


def metric_values(runs: list[RunRecord], metric: str) -> list[float]:
    """Pull one metric from every record; absence anywhere is an error."""
    if not runs:
        raise ContractError("need at least one run")
    out = []
    for rec in runs:
        if metric in rec.metrics:
            out.append(float(rec.metrics[metric]))
        elif metric == "train_seconds":
            out.append(float(rec.train_seconds))
        elif metric == "test_seconds":
            out.append(float(rec.test_seconds))
        else:
            raise ContractError(f"run {rec.run_id} has no metric {metric!r}")
    return out


def aggregate(runs: list[RunRecord], metric: str) -> tuple[float, float, float]:
    return aggregate_values(metric_values(runs, metric))
