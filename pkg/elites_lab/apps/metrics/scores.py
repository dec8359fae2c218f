"""
档案指标

- qd_score：Σ(f + o)，按 Σf + o·count 计算，偏移量只在这里使用，不写入档案
- coverage：非空单元数及占比
- best_objective：非空单元中的最大原始适应度
- evals_per_second：(1/N) Σ N_B / t_n
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from utils.exceptions import ConfigError


@dataclass(frozen=True)
class FitnessOffset:
    """使 f(θ) + o >= 0 在整个定义域上成立的常数偏移。"""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ConfigError(f"适应度偏移必须为非负有限值：{self.value}")

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class MetricsRecord:
    """每次迭代（加入档案之后）的一行指标。"""

    iteration: int
    cumulative_evaluations: int
    qd_score: float
    coverage: int
    coverage_fraction: float
    best_objective: float | None
    iteration_wall_clock: float
    evals_per_second: float
    batch_size: int
    warmup: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _offset_value(offset) -> float:
    return float(offset.value if isinstance(offset, FitnessOffset) else offset)


def qd_score(archive, offset: FitnessOffset | float = 0.0) -> float:
    filled = archive.filled_indices()
    if filled.size == 0:
        return 0.0
    return float(np.sum(archive.fitness[filled])) + _offset_value(offset) * int(filled.size)


def coverage(archive) -> tuple[int, float]:
    count = int(archive.filled_count)
    return count, count / archive.num_cells


def best_objective(archive) -> float | None:
    filled = archive.filled_indices()
    if filled.size == 0:
        return None
    return float(np.max(archive.fitness[filled]))


def evals_per_second(batch_sizes: Sequence[int], iteration_times: Sequence[float]) -> float:
    sizes = np.asarray(batch_sizes, dtype=np.float64)
    times = np.asarray(iteration_times, dtype=np.float64)
    if sizes.size == 0 or times.size == 0:
        raise ConfigError("evals_per_second 需要至少一次迭代")
    if sizes.shape != times.shape:
        raise ConfigError(f"批大小与耗时列表长度不一致：{sizes.size} / {times.size}")
    if np.any(times <= 0):
        raise ConfigError("迭代耗时必须为正数")
    return float(np.mean(sizes / times))


def snapshot(
    archive,
    offset: FitnessOffset | float,
    *,
    iteration: int,
    cumulative_evaluations: int,
    batch_size: int,
    wall_clock: float,
    warmup: bool = False,
) -> MetricsRecord:
    """从当前档案生成一条指标记录（全量扫描）。"""

    count, fraction = coverage(archive)
    return MetricsRecord(
        iteration=iteration,
        cumulative_evaluations=cumulative_evaluations,
        qd_score=qd_score(archive, offset),
        coverage=count,
        coverage_fraction=fraction,
        best_objective=best_objective(archive),
        iteration_wall_clock=wall_clock,
        evals_per_second=batch_size / wall_clock if wall_clock > 0 else math.inf,
        batch_size=batch_size,
        warmup=warmup,
    )
