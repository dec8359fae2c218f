"""
通用校验与解析工具

说明：
- 该模块用于命令行参数与配置文件的解析（网格形状、批大小列表、布尔值等）。
"""

from __future__ import annotations

import re
from typing import Iterable


_SHAPE_RE = re.compile(r"^\s*\d+(\s*[x,×]\s*\d+)*\s*$")
_INT_LIST_RE = re.compile(r"^\s*\d+(\s*,\s*\d+)*\s*$")

GENOTYPE_FORMATS = ("npz", "csv")


def validate_positive_int(value) -> bool:
    """正整数校验（bool 不算整数）。"""

    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def validate_grid_shape(shape: Iterable[int]) -> bool:
    """网格形状校验：非空，每一维为正整数。"""

    items = list(shape) if shape is not None else []
    return bool(items) and all(validate_positive_int(v) for v in items)


def parse_grid_shape(value) -> tuple[int, ...]:
    """
    解析网格形状：支持 "100x100"、"100,100"、[100, 100]。

    格式错误抛出 ValueError。
    """

    if isinstance(value, (list, tuple)):
        shape = tuple(int(v) for v in value)
    else:
        text = str(value or "")
        if not _SHAPE_RE.fullmatch(text):
            raise ValueError(f"网格形状「{text}」格式错误，应为 100x100 或 100,100")
        shape = tuple(int(v) for v in re.split(r"[x,×]", text.replace(" ", "")))
    if not validate_grid_shape(shape):
        raise ValueError(f"网格形状 {shape} 非法：每一维必须为正整数")
    return shape


def parse_int_list(value) -> list[int]:
    """解析批大小列表："64,256,1024" 或 [64, 256]。"""

    if isinstance(value, (list, tuple)):
        items = [int(v) for v in value]
    else:
        text = str(value or "")
        if not _INT_LIST_RE.fullmatch(text):
            raise ValueError(f"列表「{text}」格式错误，应为逗号分隔的正整数")
        items = [int(v) for v in text.split(",")]
    if not items or not all(v > 0 for v in items):
        raise ValueError("列表必须非空且元素为正整数")
    return items


def parse_bool(value) -> bool | None:
    """解析布尔值（true/false/1/0）。"""

    if value is None:
        return None
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in {"1", "true", "yes", "y"}:
        return True
    if v in {"0", "false", "no", "n"}:
        return False
    return None
