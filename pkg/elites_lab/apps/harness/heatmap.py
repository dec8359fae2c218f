"""
档案热力图导出

- 读取 archive.csv + archive.json，支持 1-4 维描述子
  1 维画成一行；3/4 维在尾部维度上取最大值投影到前两维
- 输出 PGM 灰度图（Pillow，8 位），每个单元 cell_pixels × cell_pixels 像素
  空单元为 0，适应度按 [min, max] 线性映射到 1..255（min == max 时全为 255）
- 同时写出 JSON 图例，bucket_of() 可由适应度反查灰度级
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from apps.archive.exporters import read_archive_snapshot
from utils.exceptions import ConfigError, UnsupportedDimensionsError
from utils.file_utils import write_json

logger = logging.getLogger(__name__)

BACKGROUND = 0
MIN_LEVEL = 1
MAX_LEVEL = 255
MAX_DIMS = 4


def _levels(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi == lo:
        return np.full(values.shape, MAX_LEVEL, dtype=np.uint8)
    scaled = (values - lo) / (hi - lo) * (MAX_LEVEL - MIN_LEVEL)
    return (MIN_LEVEL + np.rint(scaled)).clip(MIN_LEVEL, MAX_LEVEL).astype(np.uint8)


def project(dense: np.ndarray) -> np.ndarray:
    """把 1-4 维适应度网格投影为二维（空单元保持 NaN）。"""

    if dense.ndim > MAX_DIMS:
        raise UnsupportedDimensionsError(f"热力图最多支持 {MAX_DIMS} 维描述子，当前 {dense.ndim} 维")
    if dense.ndim == 1:
        return dense[None, :]
    if dense.ndim == 2:
        return dense
    # fmax 忽略 NaN，整列为空时结果仍为 NaN
    return np.fmax.reduce(dense, axis=tuple(range(2, dense.ndim)))


def bucket_of(value: float, legend: dict) -> int:
    """适应度 → 灰度级（与导出时的映射一致）。"""

    if legend.get("min") is None:
        raise ConfigError("图例为空（档案没有非空单元）")
    return int(_levels(np.asarray([value], dtype=np.float64), legend["min"], legend["max"])[0])


def export_heatmap(
    csv_path: Path,
    out_path: Path,
    cell_pixels: int = 4,
    legend_path: Path | None = None,
) -> dict:
    """
    导出热力图与图例，返回图例字典。

    图像方向：行对应 descriptor_0 的格子序号，列对应 descriptor_1，
    左上角为各维下界（行优先，与 cell_index 一致）。
    """

    if cell_pixels < 1:
        raise ConfigError("cell_pixels 必须为正整数")
    snapshot = read_archive_snapshot(Path(csv_path))
    tess = snapshot.tessellation
    if tess.dims > MAX_DIMS:
        raise UnsupportedDimensionsError(f"热力图最多支持 {MAX_DIMS} 维描述子，当前 {tess.dims} 维")

    grid = project(snapshot.dense_fitness())
    filled = ~np.isnan(grid)
    lo = float(np.min(grid[filled])) if filled.any() else None
    hi = float(np.max(grid[filled])) if filled.any() else None

    pixels = np.full(grid.shape, BACKGROUND, dtype=np.uint8)
    if filled.any():
        pixels[filled] = _levels(grid[filled], lo, hi)
    pixels = np.repeat(np.repeat(pixels, cell_pixels, axis=0), cell_pixels, axis=1)

    out_path = Path(out_path)
    Image.fromarray(pixels).save(out_path, format="PPM")

    legend = {
        "min": lo,
        "max": hi,
        "background": BACKGROUND,
        "levels": [MIN_LEVEL, MAX_LEVEL],
        "shape": list(tess.shape),
        "projected_shape": list(grid.shape),
        "cell_pixels": cell_pixels,
        "filled_cells": int(filled.sum()),
        "orientation": "row-major: rows = descriptor_0 bins, columns = descriptor_1 bins, top-left = lower bounds",
        "projection": "max over trailing dims" if tess.dims > 2 else "none",
        "image": out_path.name,
    }
    write_json(Path(legend_path) if legend_path else out_path.with_suffix(".json"), legend)
    logger.info("热力图已写出", extra={"image": str(out_path), "filled_cells": legend["filled_cells"]})
    return legend
