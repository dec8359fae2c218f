"""
选择与变异算子

- select_parents：从非空单元中有放回均匀抽取父代对
- iso_line：Iso+LineDD 变异
  θ̃ = θ1 + σ1·ε1 + σ2·ε2·(θ2 − θ1)，随后逐分量夹到 [lower, upper]
- random_genotypes：初始化用的逐分量均匀采样
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apps.archive import GridArchive
from utils.exceptions import ConfigError, EmptyArchiveError, GenotypeShapeError

from .rng import RngState, Stream, slot_normals


@dataclass(frozen=True, eq=False)
class IsoLineParams:
    """Iso+LineDD 参数；lower/upper 取 ±inf 即关闭夹取。"""

    sigma1: float = 0.01
    sigma2: float = 0.2
    lower: np.ndarray | float = 0.0
    upper: np.ndarray | float = 1.0

    def __post_init__(self):
        if not (self.sigma1 >= 0 and self.sigma2 >= 0):
            raise ConfigError(f"sigma1/sigma2 必须非负：{self.sigma1} / {self.sigma2}")
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if np.any(lower > upper):
            raise ConfigError("变异夹取边界必须满足 lower <= upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


def select_parents(archive: GridArchive, batch_size: int, rng: RngState) -> tuple[np.ndarray, np.ndarray]:
    """
    有放回均匀选择 batch_size 对父代，返回两个 (batch_size, genotype_len) 副本。

    档案为空时抛出 EmptyArchiveError（应先执行初始化）。
    """

    if batch_size < 0:
        raise ConfigError("batch_size 不能为负")
    if batch_size == 0:
        empty = np.zeros((0, archive.genotype_len), dtype=np.float64)
        return empty, empty.copy()

    filled = archive.filled_indices()
    if filled.size == 0:
        raise EmptyArchiveError()

    picks = rng.generator(Stream.SELECTION).integers(0, filled.size, size=(2, batch_size))
    cells = filled[picks]
    # 花式索引返回副本，不会与档案共享内存
    return archive.genotypes[cells[0]], archive.genotypes[cells[1]]


def apply_iso_line(parents1, parents2, eps1, eps2, params: IsoLineParams) -> np.ndarray:
    """给定噪声的 Iso+LineDD 计算（纯函数）。"""

    p1 = np.asarray(parents1, dtype=np.float64)
    p2 = np.asarray(parents2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise GenotypeShapeError(f"父代形状不一致：{p1.shape} / {p2.shape}")
    eps1 = np.asarray(eps1, dtype=np.float64).reshape(p1.shape)
    if p1.ndim > 1:
        eps2 = np.asarray(eps2, dtype=np.float64).reshape(p1.shape[:-1] + (1,))
    else:
        eps2 = float(eps2)

    offspring = p1 + params.sigma1 * eps1 + params.sigma2 * eps2 * (p2 - p1)
    return np.clip(offspring, params.lower, params.upper)


def iso_line(parents1, parents2, params: IsoLineParams, rng: RngState) -> np.ndarray:
    """
    Iso+LineDD 变异，返回 (batch, genotype_len) 子代。

    槽位 j 使用 (VARIATION, j) 随机流：先抽 ε1（genotype_len 个），再抽 ε2（1 个）。
    """

    p1 = np.asarray(parents1, dtype=np.float64)
    p2 = np.asarray(parents2, dtype=np.float64)
    if p1.ndim != 2 or p1.shape != p2.shape:
        raise GenotypeShapeError(f"父代应为对齐的二维数组：{p1.shape} / {p2.shape}")

    batch, length = p1.shape
    if batch == 0:
        return p1.copy()
    normals = slot_normals(rng, Stream.VARIATION, batch, length + 1)
    return apply_iso_line(p1, p2, normals[:, :length], normals[:, length], params)


def random_genotypes(batch_size: int, lower, upper, length: int, rng: RngState) -> np.ndarray:
    """逐分量在 [lower, upper] 上均匀采样，每个槽位独立随机流（INIT）。"""

    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (length,))
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (length,))
    out = np.empty((batch_size, length), dtype=np.float64)
    for slot in range(batch_size):
        out[slot] = rng.generator(Stream.INIT, slot).uniform(lower, upper)
    return out
