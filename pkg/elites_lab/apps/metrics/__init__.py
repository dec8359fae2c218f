from .scores import (
    FitnessOffset,
    MetricsRecord,
    best_objective,
    coverage,
    evals_per_second,
    qd_score,
    snapshot,
)
from .stats import RankSumResult, bonferroni, rank_sum_test, summarize

__all__ = [
    "FitnessOffset",
    "MetricsRecord",
    "RankSumResult",
    "best_objective",
    "bonferroni",
    "coverage",
    "evals_per_second",
    "qd_score",
    "rank_sum_test",
    "snapshot",
    "summarize",
]
