"""
秩和检验与汇总统计

rank_sum_test：
- U 为样本 a 的统计量（并列取平均秩）
- 两组样本量都不超过 EXACT_MAX_SIZE 时，在合并秩上枚举全部分组得到精确双侧 p 值
- 否则使用带并列修正与 0.5 连续性修正的正态近似
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata

from utils.exceptions import ConfigError

EXACT_MAX_SIZE = 8
MIN_SAMPLE_SIZE = 3

_TOL = 1e-9


@dataclass(frozen=True)
class RankSumResult:
    u: float
    p_value: float
    method: str


def _tie_term(ranks: np.ndarray) -> float:
    _, counts = np.unique(ranks, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def _exact_p(ranks: np.ndarray, n1: int, u_obs: float) -> float:
    n = ranks.size
    mu = n1 * (n - n1) / 2.0
    shift = n1 * (n1 + 1) / 2.0
    observed = abs(u_obs - mu)
    hits = 0
    total = 0
    for combo in itertools.combinations(range(n), n1):
        u = float(ranks[list(combo)].sum()) - shift
        if abs(u - mu) >= observed - _TOL:
            hits += 1
        total += 1
    return hits / total


def _normal_p(ranks: np.ndarray, n1: int, n2: int, u_obs: float) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2.0
    s = math.sqrt(n1 * n2 / 12.0 * ((n + 1) - _tie_term(ranks) / (n * (n - 1))))
    big_u = max(u_obs, n1 * n2 - u_obs)
    z = (big_u - mu - 0.5) / s
    return float(2.0 * norm.sf(z))


def rank_sum_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> RankSumResult:
    """Wilcoxon 秩和（Mann-Whitney U）双侧检验。"""

    a = np.asarray(sample_a, dtype=np.float64).reshape(-1)
    b = np.asarray(sample_b, dtype=np.float64).reshape(-1)
    if a.size < MIN_SAMPLE_SIZE or b.size < MIN_SAMPLE_SIZE:
        raise ConfigError(f"秩和检验每组至少需要 {MIN_SAMPLE_SIZE} 个样本：{a.size} / {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ConfigError("秩和检验样本必须为有限值")

    n1, n2 = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    exact = n1 <= EXACT_MAX_SIZE and n2 <= EXACT_MAX_SIZE
    method = "exact" if exact else "normal"

    if np.all(ranks == ranks[0]):
        return RankSumResult(u=u, p_value=1.0, method=method)

    p = _exact_p(ranks, n1, u) if exact else _normal_p(ranks, n1, n2, u)
    return RankSumResult(u=u, p_value=min(max(p, 0.0), 1.0), method=method)


def bonferroni(p_value: float, factor: int) -> float:
    if factor < 1:
        raise ConfigError("Bonferroni 校正因子至少为 1")
    return min(1.0, p_value * factor)


def summarize(values: Sequence[float]) -> dict:
    """中位数与四分位距（线性插值分位数）。"""

    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        return {"median": None, "q1": None, "q3": None, "iqr": None}
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {"median": float(median), "q1": float(q1), "q3": float(q3), "iqr": float(q3 - q1)}
