"""
档案快照导出 / 读取

文件格式：
- archive.csv：cell_index, descriptor_0..descriptor_{d-1}, fitness（仅非空单元，按下标升序）
- archive.json：网格上下界、形状、基因型长度等（消费方据此 reshape）
- genotypes.npz / genotypes.csv：按 cell_index 索引的基因型
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tablib

from utils.exceptions import ConfigError
from utils.file_utils import write_bytes, write_json
from utils.validators import GENOTYPE_FORMATS

from .grid_archive import GridArchive
from .tessellation import GridTessellation


def archive_headers(dims: int) -> list[str]:
    return ["cell_index", *[f"descriptor_{i}" for i in range(dims)], "fitness"]


def archive_dataset(archive: GridArchive) -> tablib.Dataset:
    """非空单元组成的表格。"""

    data = tablib.Dataset(headers=archive_headers(archive.tessellation.dims))
    for cell in archive.filled_indices().tolist():
        data.append([cell, *archive.descriptors[cell].tolist(), float(archive.fitness[cell])])
    return data


def write_archive_csv(archive: GridArchive, path: Path) -> Path:
    return write_bytes(path, archive_dataset(archive).export("csv"))


def write_archive_meta(archive: GridArchive, path: Path) -> Path:
    """写出 archive.json 边车文件。"""

    payload = {
        **archive.tessellation.to_dict(),
        "genotype_len": archive.genotype_len,
        "filled_count": archive.filled_count,
        "empty_sentinel": "nan",
    }
    return write_json(path, payload)


def write_genotypes(archive: GridArchive, path: Path, fmt: str = "npz") -> Path:
    """
    导出基因型。

    - npz：二进制，数组 cell_index / genotypes
    - csv：cell_index, gene_0..gene_{n-1}
    """

    if fmt not in GENOTYPE_FORMATS:
        raise ConfigError(f"不支持的基因型导出格式：{fmt}（可选 {', '.join(GENOTYPE_FORMATS)}）")

    cells = archive.filled_indices()
    if fmt == "npz":
        with open(path, "wb") as fh:
            np.savez(fh, cell_index=cells, genotypes=archive.genotypes[cells])
        return Path(path)

    data = tablib.Dataset(headers=["cell_index", *[f"gene_{i}" for i in range(archive.genotype_len)]])
    for cell in cells.tolist():
        data.append([cell, *archive.genotypes[cell].tolist()])
    return write_bytes(path, data.export("csv"))


@dataclass(frozen=True)
class ArchiveSnapshot:
    """从 archive.csv + archive.json 读回的档案快照（不含基因型）。"""

    tessellation: GridTessellation
    cells: np.ndarray
    descriptors: np.ndarray
    fitness: np.ndarray

    def dense_fitness(self) -> np.ndarray:
        """还原为按网格形状排列的适应度数组，空单元为 NaN。"""

        dense = np.full(self.tessellation.num_cells, np.nan, dtype=np.float64)
        dense[self.cells] = self.fitness
        return dense.reshape(self.tessellation.shape)


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def read_archive_snapshot(csv_path: Path, meta_path: Path | None = None) -> ArchiveSnapshot:
    """读取档案快照；边车文件默认与 csv 同名（.json）。"""

    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else sidecar_path(csv_path)
    if not csv_path.is_file():
        raise ConfigError(f"档案文件不存在：{csv_path}")
    if not meta_path.is_file():
        raise ConfigError(f"档案边车文件不存在：{meta_path}")

    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    tess = GridTessellation.from_dict(meta)

    data = tablib.Dataset().load(csv_path.read_text(encoding="utf-8"), format="csv")
    expected = archive_headers(tess.dims)
    if list(data.headers or []) != expected:
        raise ConfigError(f"档案表头不符：{data.headers}，应为 {expected}")

    rows = [[float(v) for v in row] for row in data]
    table = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(expected))
    return ArchiveSnapshot(
        tessellation=tess,
        cells=table[:, 0].astype(np.int64),
        descriptors=table[:, 1:-1],
        fitness=table[:, -1],
    )
