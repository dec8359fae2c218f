"""
评估结果与批量并行评估

说明：
- 评估函数（ScoringFunction）实例构造后不可变，可在多进程间共享。
- evaluate_batch 把批次切成至多 workers 个连续分块，经 multiprocessing.Pool 映射，
  按输入顺序拼接；workers=1 与 workers=W 的结果逐位一致。
"""

from __future__ import annotations

import logging
import multiprocessing
import time
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from utils.exceptions import GenotypeShapeError, QDError, TaskEvaluationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Evaluation:
    """单个候选解的评估结果。"""

    raw_fitness: float
    descriptor: tuple[float, ...]
    dead: bool = False
    fail_step: int | None = None


@dataclass
class EvaluationBatch:
    """批量评估结果（并行数组）；fail_step 为 -1 表示回合未提前结束。"""

    fitness: np.ndarray
    descriptors: np.ndarray
    dead: np.ndarray
    fail_step: np.ndarray
    elapsed: float = field(default=0.0, compare=False)

    def __len__(self) -> int:
        return int(self.fitness.shape[0])

    def __getitem__(self, index: int) -> Evaluation:
        step = int(self.fail_step[index])
        return Evaluation(
            raw_fitness=float(self.fitness[index]),
            descriptor=tuple(self.descriptors[index].tolist()),
            dead=bool(self.dead[index]),
            fail_step=None if step < 0 else step,
        )

    def to_list(self) -> list[Evaluation]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def empty(cls, descriptor_dims: int) -> "EvaluationBatch":
        return cls(
            fitness=np.zeros(0, dtype=np.float64),
            descriptors=np.zeros((0, descriptor_dims), dtype=np.float64),
            dead=np.zeros(0, dtype=bool),
            fail_step=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concatenate(cls, parts: Sequence["EvaluationBatch"], descriptor_dims: int) -> "EvaluationBatch":
        if not parts:
            return cls.empty(descriptor_dims)
        return cls(
            fitness=np.concatenate([p.fitness for p in parts]),
            descriptors=np.concatenate([p.descriptors for p in parts]),
            dead=np.concatenate([p.dead for p in parts]),
            fail_step=np.concatenate([p.fail_step for p in parts]),
        )


class ScoringFunction(Protocol):
    """评估函数约定：纯函数、确定性，与批次组成及进程分配无关。"""

    name: str

    @property
    def genotype_len(self) -> int: ...

    @property
    def descriptor_dims(self) -> int: ...

    @property
    def descriptor_lower(self) -> tuple[float, ...]: ...

    @property
    def descriptor_upper(self) -> tuple[float, ...]: ...

    @property
    def genotype_lower(self) -> float: ...

    @property
    def genotype_upper(self) -> float: ...

    @property
    def fitness_offset(self) -> Any: ...

    @property
    def default_grid_shape(self) -> tuple[int, ...]: ...

    def evaluate(self, genotype) -> Evaluation: ...

    def evaluate_many(self, genotypes: np.ndarray) -> EvaluationBatch: ...

    def config_dict(self) -> dict: ...


def _describe(exc: BaseException) -> str:
    return str(exc) or exc.__class__.__name__


def _evaluate_chunk(args: tuple[ScoringFunction, int, np.ndarray]) -> EvaluationBatch:
    """评估一个分块；失败时逐行定位第一个出错的基因型。"""

    scoring, offset, chunk = args
    try:
        return scoring.evaluate_many(chunk)
    except Exception as exc:
        for i in range(chunk.shape[0]):
            try:
                scoring.evaluate_many(chunk[i : i + 1])
            except Exception as row_exc:
                raise TaskEvaluationError(_describe(row_exc), offset + i) from None
        raise TaskEvaluationError(_describe(exc), offset) from None


def evaluate_batch(
    scoring: ScoringFunction,
    genotypes,
    workers: int = 1,
    pool: multiprocessing.pool.Pool | None = None,
) -> EvaluationBatch:
    """
    批量评估，结果与输入位置对齐，elapsed 记录墙钟耗时（秒）。

    参数：
        workers: 并行进程数；>1 且未传入 pool 时临时创建进程池。
        pool: 调用方持有的进程池（主循环整个运行复用同一个）。
    """

    started = time.perf_counter()
    batch = np.asarray(genotypes, dtype=np.float64)
    if batch.size == 0:
        result = EvaluationBatch.empty(scoring.descriptor_dims)
        result.elapsed = time.perf_counter() - started
        return result
    if batch.ndim != 2 or batch.shape[1] != scoring.genotype_len:
        raise GenotypeShapeError(
            f"基因型批次形状 {batch.shape} 与任务 {scoring.name} 不符（长度应为 {scoring.genotype_len}）"
        )
    if workers < 1:
        raise QDError("workers 必须为正整数")

    n_chunks = min(workers, batch.shape[0])
    bounds = np.linspace(0, batch.shape[0], n_chunks + 1).astype(int)
    jobs = [(scoring, int(lo), batch[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    if n_chunks == 1:
        parts = [_evaluate_chunk(jobs[0])]
    elif pool is not None:
        parts = pool.map(_evaluate_chunk, jobs)
    else:
        with multiprocessing.Pool(n_chunks) as own_pool:
            parts = own_pool.map(_evaluate_chunk, jobs)

    result = EvaluationBatch.concatenate(parts, scoring.descriptor_dims)
    result.elapsed = time.perf_counter() - started
    logger.debug(
        "批量评估完成",
        extra={"task": scoring.name, "batch": len(result), "workers": n_chunks, "elapsed": result.elapsed},
    )
    return result
