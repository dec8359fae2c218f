"""
定容网格档案

模块说明：
- 预分配并行数组：fitness（NaN 表示空单元）、descriptors、genotypes，长度构造后不变。
- 批量加入按四步掩码完成：
  (i) 去掉死亡候选；(ii) 同一单元内只保留适应度最高者（并列取批内位置最小者）；
  (iii) 与现任精英比较，严格更优或单元为空才进入；(iv) 一次性写入。
- 单写者：同一时刻只允许一个 add_batch 在执行。
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from utils.exceptions import GenotypeShapeError, InvalidEvaluationError

from .tessellation import GridTessellation

logger = logging.getLogger(__name__)

EMPTY = np.nan


class AddOutcome(enum.IntEnum):
    """候选解加入档案的结果。"""

    INSERTED = 0
    REPLACED = 1
    REJECTED_WORSE = 2
    REJECTED_DEAD = 3


@dataclass(frozen=True)
class Candidate:
    """已评估的候选解。"""

    genotype: np.ndarray
    fitness: float
    descriptor: Sequence[float]
    dead: bool = False


class GridArchive:
    """MAP-Elites 网格档案（每个单元一个精英）。"""

    def __init__(self, tessellation: GridTessellation, genotype_len: int):
        if genotype_len < 1:
            raise GenotypeShapeError("基因型长度必须为正整数")
        self.tessellation = tessellation
        self.genotype_len = int(genotype_len)
        self.fitness = np.full(tessellation.num_cells, EMPTY, dtype=np.float64)
        self.descriptors = np.zeros((tessellation.num_cells, tessellation.dims), dtype=np.float64)
        self.genotypes = np.zeros((tessellation.num_cells, self.genotype_len), dtype=np.float64)
        self.filled_count = 0

    @property
    def num_cells(self) -> int:
        return self.tessellation.num_cells

    def filled_mask(self) -> np.ndarray:
        return ~np.isnan(self.fitness)

    def filled_indices(self) -> np.ndarray:
        """非空单元下标（升序）。"""

        return np.flatnonzero(self.filled_mask())

    def elite(self, cell: int) -> Candidate | None:
        """取单元精英的副本；空单元返回 None。"""

        if np.isnan(self.fitness[cell]):
            return None
        return Candidate(
            genotype=self.genotypes[cell].copy(),
            fitness=float(self.fitness[cell]),
            descriptor=tuple(self.descriptors[cell].tolist()),
        )

    def add_batch(self, genotypes, fitnesses, descriptors, dead=None) -> np.ndarray:
        """
        批量加入（数组形式），返回每个候选的 AddOutcome 编码数组。

        参数：
            genotypes: (n, genotype_len)
            fitnesses: (n,)
            descriptors: (n, dims)
            dead: (n,) 布尔，None 表示全部存活
        """

        genotypes = np.asarray(genotypes, dtype=np.float64)
        fitnesses = np.asarray(fitnesses, dtype=np.float64).reshape(-1)
        n = fitnesses.shape[0]
        if n == 0:
            return np.zeros(0, dtype=np.int8)
        if genotypes.ndim != 2 or genotypes.shape != (n, self.genotype_len):
            raise GenotypeShapeError(
                f"候选基因型形状 {genotypes.shape} 与档案不符，应为 ({n}, {self.genotype_len})"
            )
        descriptors = np.asarray(descriptors, dtype=np.float64).reshape(n, -1)
        dead = np.zeros(n, dtype=bool) if dead is None else np.asarray(dead, dtype=bool).reshape(-1)

        outcome = np.full(n, AddOutcome.REJECTED_WORSE, dtype=np.int8)
        # (i) 死亡标记
        outcome[dead] = AddOutcome.REJECTED_DEAD
        live = np.flatnonzero(~dead)
        if live.size == 0:
            return outcome

        fit = fitnesses[live]
        if not np.all(np.isfinite(fit)):
            raise InvalidEvaluationError("存活候选的适应度必须为有限值")
        cells = self.tessellation.cell_indices(descriptors[live])

        # (ii) 单元内去冲突：按 (单元升序, 适应度降序, 批内位置升序) 排序，取每组第一个
        order = np.lexsort((live, -fit, cells))
        sorted_cells = cells[order]
        first = np.ones(order.size, dtype=bool)
        first[1:] = sorted_cells[1:] != sorted_cells[:-1]
        winners = order[first]

        # (iii) 与现任比较：空单元或严格更优
        w_cells = cells[winners]
        w_fit = fit[winners]
        incumbent = self.fitness[w_cells]
        empty = np.isnan(incumbent)
        accept = empty | (w_fit > incumbent)

        # (iv) 写入
        acc_cells = w_cells[accept]
        acc_rows = live[winners[accept]]
        self.fitness[acc_cells] = w_fit[accept]
        self.descriptors[acc_cells] = descriptors[acc_rows]
        self.genotypes[acc_cells] = genotypes[acc_rows]
        outcome[acc_rows] = np.where(empty[accept], AddOutcome.INSERTED, AddOutcome.REPLACED)

        inserted = int(np.count_nonzero(empty[accept]))
        self.filled_count += inserted
        logger.debug(
            "批量加入档案",
            extra={"batch": n, "inserted": inserted, "replaced": int(acc_cells.size) - inserted},
        )
        return outcome


def batched_add(archive: GridArchive, candidates: Sequence[Candidate]) -> list[AddOutcome]:
    """候选解列表形式的批量加入。"""

    if not candidates:
        return []
    genotypes = [np.asarray(c.genotype, dtype=np.float64).reshape(-1) for c in candidates]
    lengths = {g.size for g in genotypes}
    if lengths != {archive.genotype_len}:
        raise GenotypeShapeError(f"候选基因型长度 {sorted(lengths)} 与档案长度 {archive.genotype_len} 不符")

    dims = archive.tessellation.dims
    descriptors = np.zeros((len(candidates), dims), dtype=np.float64)
    for row, c in enumerate(candidates):
        if not c.dead:
            descriptors[row] = np.asarray(c.descriptor, dtype=np.float64).reshape(dims)

    codes = archive.add_batch(
        np.stack(genotypes),
        [c.fitness for c in candidates],
        descriptors,
        [c.dead for c in candidates],
    )
    return [AddOutcome(int(code)) for code in codes]


def filled_indices(archive: GridArchive) -> np.ndarray:
    """非空单元下标（升序），长度等于 filled_count。"""

    return archive.filled_indices()
