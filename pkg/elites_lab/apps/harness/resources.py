"""
Harness 模块导出资源类

支持：
- metrics.csv / timings.csv（单次运行）
- sweep_metrics.csv / sweep_timings.csv（批大小消融实验，长表格式）
- throughput.csv（吞吐量实验）

确定性文件（metrics.csv、sweep_metrics.csv）只包含与墙钟无关的列，
耗时数据一律写入 *timings.csv。
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable

from import_export import fields, resources
from import_export.widgets import Widget

from utils.file_utils import write_bytes


class ValueWidget(Widget):
    """导出渲染：None → 空串，布尔 → 0/1，浮点数使用 repr（往返精确）。"""

    def render(self, value, obj=None, **kwargs):
        if value is None:
            return ""
        if isinstance(value, bool):
            return str(int(value))
        if isinstance(value, float):
            return repr(value) if math.isfinite(value) else str(value)
        return str(value)


def _field(attribute: str, column_name: str | None = None) -> fields.Field:
    return fields.Field(attribute=attribute, column_name=column_name or attribute.split("__")[-1], widget=ValueWidget())


class MetricsResource(resources.Resource):
    """
    metrics.csv 导出资源类。

    字段映射（MetricsRecord）：
    - iteration → 迭代序号（0 为初始化）
    - cumulative_evaluations → 累计评估次数
    - qd_score / coverage / coverage_fraction / best_objective → 加入档案后的指标
    """

    iteration = _field("iteration")
    cumulative_evaluations = _field("cumulative_evaluations")
    qd_score = _field("qd_score")
    coverage = _field("coverage")
    coverage_fraction = _field("coverage_fraction")
    best_objective = _field("best_objective")


class TimingsResource(resources.Resource):
    """timings.csv 导出资源类（第 0 次迭代标记为 warmup）。"""

    iteration = _field("iteration")
    batch_size = _field("batch_size")
    iteration_wall_clock = _field("iteration_wall_clock")
    evals_per_second = _field("evals_per_second")
    warmup = _field("warmup")


class SweepMetricsResource(resources.Resource):
    """
    sweep_metrics.csv 导出资源类。

    每行对应 (batch_size, replication, iteration)，足以按评估次数、
    迭代次数两种横轴重画收敛曲线。
    """

    batch_size = _field("batch_size")
    replication = _field("replication")
    seed = _field("seed")
    iteration = _field("record__iteration")
    cumulative_evaluations = _field("record__cumulative_evaluations")
    qd_score = _field("record__qd_score")
    coverage = _field("record__coverage")
    best_objective = _field("record__best_objective")


class SweepTimingsResource(resources.Resource):
    """sweep_timings.csv 导出资源类；elapsed 为运行内累计墙钟时间（按运行时间横轴作图）。"""

    batch_size = _field("batch_size")
    replication = _field("replication")
    seed = _field("seed")
    iteration = _field("record__iteration")
    iteration_wall_clock = _field("record__iteration_wall_clock")
    elapsed = _field("elapsed")


class ThroughputResource(resources.Resource):
    """throughput.csv 导出资源类。"""

    batch_size = _field("batch_size")
    workers = _field("workers")
    iterations = _field("iterations")
    evaluations = _field("evaluations")
    evals_per_second = _field("evals_per_second")
    evals_per_second_steady = _field("evals_per_second_steady")
    runtime_seconds = _field("runtime_seconds")
    status = _field("status")
    error = _field("error")


def export_csv(resource_class: type[resources.Resource], rows: Iterable, path: Path) -> Path:
    """按资源类导出 CSV。"""

    dataset = resource_class().export(list(rows))
    return write_bytes(path, dataset.export("csv"))
