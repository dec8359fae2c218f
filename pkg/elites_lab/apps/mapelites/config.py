"""运行配置与运行结果。"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from apps.archive import GridArchive, GridTessellation
from apps.metrics import MetricsRecord
from apps.tasks import build_task
from utils.exceptions import ConfigError
from utils.validators import parse_grid_shape


@dataclass(frozen=True)
class RunConfig:
    """
    单次 MAP-Elites 运行的全部参数。

    预算规则：初始化之后执行 ⌈(budget − init_batch_size) / batch_size⌉ 次迭代，
    最后一次迭代也使用完整批次，超出预算不超过 batch_size − 1。
    iterations 不为空时改为固定迭代次数（吞吐量实验使用），忽略预算。
    """

    task: str
    batch_size: int = 256
    budget: int = 102400
    init_batch_size: int | None = None
    grid_shape: tuple[int, ...] | None = None
    sigma1: float = 0.01
    sigma2: float = 0.2
    seed: int = 0
    workers: int = 1
    init_retries: int = 10
    iterations: int | None = None
    task_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size 必须为正整数：{self.batch_size}")
        if self.init_batch_size is None:
            object.__setattr__(self, "init_batch_size", self.batch_size)
        if self.init_batch_size < 1:
            raise ConfigError("init_batch_size 必须为正整数：初始批次为空时无法选择父代")
        if self.workers < 1:
            raise ConfigError(f"workers 必须为正整数：{self.workers}")
        if self.init_retries < 1:
            raise ConfigError("init_retries 至少为 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"随机种子必须是 64 位无符号整数：{self.seed}")
        if self.iterations is not None:
            if self.iterations < 0:
                raise ConfigError("iterations 不能为负")
        elif self.budget < self.init_batch_size:
            raise ConfigError(f"评估预算 {self.budget} 小于初始批次 {self.init_batch_size}")
        if self.grid_shape is not None:
            try:
                object.__setattr__(self, "grid_shape", parse_grid_shape(self.grid_shape))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    @property
    def iterations_planned(self) -> int:
        if self.iterations is not None:
            return self.iterations
        return math.ceil((self.budget - self.init_batch_size) / self.batch_size)

    @property
    def evaluations_planned(self) -> int:
        return self.init_batch_size + self.iterations_planned * self.batch_size

    def build_task(self):
        return build_task(self.task, **self.task_options)

    def build_tessellation(self, scoring) -> GridTessellation:
        shape = self.grid_shape or scoring.default_grid_shape
        if len(shape) != scoring.descriptor_dims:
            raise ConfigError(f"网格维度 {len(shape)} 与任务描述子维度 {scoring.descriptor_dims} 不符")
        return GridTessellation(scoring.descriptor_lower, scoring.descriptor_upper, shape)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "task_options": dict(sorted(self.task_options.items())),
            "grid_shape": list(self.grid_shape) if self.grid_shape else None,
            "batch_size": self.batch_size,
            "budget": self.budget,
            "init_batch_size": self.init_batch_size,
            "iterations": self.iterations,
            "iterations_planned": self.iterations_planned,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "seed": self.seed,
            "workers": self.workers,
            "init_retries": self.init_retries,
        }


@dataclass
class RunResult:
    archive: GridArchive
    records: list[MetricsRecord]
    total_wall_clock: float
    total_evaluations: int
    iterations: int
    overshoot: int
    init_attempts: int = 1

    @property
    def final(self) -> MetricsRecord:
        return self.records[-1]
