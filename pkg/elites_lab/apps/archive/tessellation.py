"""
描述子空间网格划分

将连续描述子映射为行优先（row-major）的扁平单元下标：
- 每一维 idx_i = floor((d_i - lower_i) / (upper_i - lower_i) * shape_i)
- 越界描述子夹到边缘单元，而不是拒绝
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from utils.exceptions import ConfigError, InvalidEvaluationError

_INDEX_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class GridTessellation:
    """网格划分：每维上下界 + 每维单元数。"""

    lower: np.ndarray
    upper: np.ndarray
    shape: tuple[int, ...]
    num_cells: int = field(init=False)

    def __post_init__(self):
        lower_arr = np.array(self.lower, dtype=np.float64).reshape(-1)
        upper_arr = np.array(self.upper, dtype=np.float64).reshape(-1)
        shape_tuple = tuple(int(s) for s in self.shape)

        if not (len(lower_arr) == len(upper_arr) == len(shape_tuple)) or not shape_tuple:
            raise ConfigError("网格上下界与形状的维数必须一致且非空")
        if not np.all(np.isfinite(lower_arr)) or not np.all(np.isfinite(upper_arr)):
            raise ConfigError("网格上下界必须为有限值")
        if not np.all(lower_arr < upper_arr):
            raise ConfigError(f"每一维必须满足 lower < upper：{lower_arr.tolist()} / {upper_arr.tolist()}")
        if any(s < 1 for s in shape_tuple):
            raise ConfigError(f"网格形状 {shape_tuple} 非法：每一维至少 1 个单元")

        total = 1
        for s in shape_tuple:
            total *= s
            if total > _INDEX_MAX:
                raise ConfigError(f"网格单元总数超出 int64 范围：{shape_tuple}")

        lower_arr.setflags(write=False)
        upper_arr.setflags(write=False)
        object.__setattr__(self, "lower", lower_arr)
        object.__setattr__(self, "upper", upper_arr)
        object.__setattr__(self, "shape", shape_tuple)
        object.__setattr__(self, "num_cells", total)

    @property
    def dims(self) -> int:
        return len(self.shape)

    def cell_indices(self, descriptors) -> np.ndarray:
        """批量计算扁平单元下标，descriptors 形如 (n, dims)。"""

        d = np.asarray(descriptors, dtype=np.float64)
        if d.ndim == 1:
            d = d.reshape(1, -1)
        if d.shape[1] != self.dims:
            raise InvalidEvaluationError(f"描述子维数为 {d.shape[1]}，网格为 {self.dims} 维")
        if not np.all(np.isfinite(d)):
            raise InvalidEvaluationError("描述子包含非有限值（NaN/Inf），评估无效")

        shape = np.asarray(self.shape, dtype=np.int64)
        scaled = (d - self.lower) / (self.upper - self.lower) * shape
        idx = np.clip(np.floor(scaled), 0, shape - 1).astype(np.int64)
        return np.ravel_multi_index(tuple(idx.T), self.shape).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "shape": list(self.shape),
            "dims": self.dims,
            "num_cells": self.num_cells,
            "index_order": "row-major",
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridTessellation":
        return cls(data["lower"], data["upper"], data["shape"])


def cell_index(tess: GridTessellation, descriptor: Sequence[float]) -> int:
    """单个描述子 → 扁平单元下标。"""

    return int(tess.cell_indices(np.asarray(descriptor, dtype=np.float64).reshape(1, -1))[0])
