"""
黑盒基准函数：rastrigin / sphere

- 基因型为 [0,1]^N 上的参数向量，公式直接作用于基因型（不做区间缩放）
- 描述子为前两个参数 (θ0, θ1)
- 两个函数在 [0,1]^N 上都不大于 0，仅在全零向量处取 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apps.metrics.scores import FitnessOffset
from utils.exceptions import ConfigError, GenotypeShapeError

from .evaluation import Evaluation, EvaluationBatch

BENCHMARK_KINDS = ("rastrigin", "sphere")


def rastrigin_fitness(theta: np.ndarray) -> float:
    """f = -10N - Σ(θi² - 10cos(2πθi))"""

    return float(-10.0 * theta.size - np.sum(theta**2 - 10.0 * np.cos(2.0 * np.pi * theta)))


def sphere_fitness(theta: np.ndarray) -> float:
    """f = -‖θ‖²"""

    return float(-np.sum(theta * theta))


_FITNESS = {"rastrigin": rastrigin_fitness, "sphere": sphere_fitness}


def _as_genotype(genotype) -> np.ndarray:
    theta = np.asarray(genotype, dtype=np.float64).reshape(-1)
    if theta.size < 2:
        raise GenotypeShapeError("基准函数至少需要 2 个参数（描述子取前两个参数）")
    return theta


def rastrigin(genotype) -> Evaluation:
    theta = _as_genotype(genotype)
    return Evaluation(raw_fitness=rastrigin_fitness(theta), descriptor=(float(theta[0]), float(theta[1])))


def sphere(genotype) -> Evaluation:
    theta = _as_genotype(genotype)
    return Evaluation(raw_fitness=sphere_fitness(theta), descriptor=(float(theta[0]), float(theta[1])))


@dataclass(frozen=True)
class BenchmarkTask:
    """rastrigin / sphere 评估函数（默认 N=100）。"""

    kind: str
    num_params: int = 100

    def __post_init__(self):
        if self.kind not in BENCHMARK_KINDS:
            raise ConfigError(f"未知基准函数：{self.kind}")
        if self.num_params < 2:
            raise ConfigError("num_params 至少为 2")

    @property
    def name(self) -> str:
        return self.kind

    @property
    def genotype_len(self) -> int:
        return self.num_params

    @property
    def descriptor_dims(self) -> int:
        return 2

    @property
    def descriptor_lower(self) -> tuple[float, ...]:
        return (0.0, 0.0)

    @property
    def descriptor_upper(self) -> tuple[float, ...]:
        return (1.0, 1.0)

    @property
    def genotype_lower(self) -> float:
        return 0.0

    @property
    def genotype_upper(self) -> float:
        return 1.0

    @property
    def default_grid_shape(self) -> tuple[int, ...]:
        return (100, 100)

    @property
    def fitness_offset(self) -> FitnessOffset:
        # sphere: -‖θ‖² >= -N；rastrigin: 每项 θ²-10cos(2πθ) ∈ [-10, 11]，f >= -21N
        if self.kind == "sphere":
            return FitnessOffset(float(self.num_params))
        return FitnessOffset(21.0 * self.num_params)

    def evaluate(self, genotype) -> Evaluation:
        return rastrigin(genotype) if self.kind == "rastrigin" else sphere(genotype)

    def evaluate_many(self, genotypes: np.ndarray) -> EvaluationBatch:
        batch = np.asarray(genotypes, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.num_params:
            raise GenotypeShapeError(f"基因型批次形状 {batch.shape} 不符，长度应为 {self.num_params}")
        fitness_fn = _FITNESS[self.kind]
        # 逐行计算，保证结果与批次组成无关
        fitness = np.array([fitness_fn(row) for row in batch], dtype=np.float64)
        return EvaluationBatch(
            fitness=fitness,
            descriptors=batch[:, :2].copy(),
            dead=np.zeros(batch.shape[0], dtype=bool),
            fail_step=np.full(batch.shape[0], -1, dtype=np.int64),
        )

    def config_dict(self) -> dict:
        return {"name": self.kind, "num_params": self.num_params}
