"""任务注册表：CLI 按名称构建评估函数。"""

from __future__ import annotations

import logging

from utils.exceptions import ConfigError

from .benchmarks import BenchmarkTask
from .point_nav import PointNavConfig, PointNavTask

logger = logging.getLogger(__name__)


def _benchmark(kind: str):
    def build(num_params: int | None = None, **_ignored):
        return BenchmarkTask(kind, num_params=num_params) if num_params is not None else BenchmarkTask(kind)

    return build


def _point_nav(episode_len=None, hidden_size=None, death_policy=None, **_ignored):
    options = {"episode_len": episode_len, "hidden_size": hidden_size, "death_policy": death_policy}
    return PointNavTask(PointNavConfig(**{k: v for k, v in options.items() if v is not None}))


TASKS = {
    "rastrigin": _benchmark("rastrigin"),
    "sphere": _benchmark("sphere"),
    "point_nav": _point_nav,
}


def build_task(name: str, **options):
    """
    按名称构建任务；值为 None 的选项视为未设置，与任务无关的选项忽略。

    未知名称抛出 ConfigError。
    """

    try:
        factory = TASKS[name]
    except KeyError:
        raise ConfigError(f"未知任务：{name}（可选 {', '.join(sorted(TASKS))}）") from None
    task = factory(**options)
    logger.debug("构建任务", extra={"task": name, "genotype_len": task.genotype_len})
    return task
