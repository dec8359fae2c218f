"""
确定性点导航回合任务

状态 (x, y, vx, vy) 从原点静止出发，每步：
    a = MLP(状态) ∈ [-1,1]²
    v ← damping·v + a·dt
    p ← p + v·dt
越出边界（|x| 或 |y| > half_width）即失败。仍在场内的步获得 r_s − c·‖a‖²。

失败处理：
- prefix（默认）：描述子取失败前一步的位置，记录 fail_step；只有第 0 步失败才判定死亡
- discard：任何失败都判定死亡
- 数值溢出（状态非有限）一律判定死亡
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from apps.metrics.scores import FitnessOffset
from utils.exceptions import ConfigError, GenotypeShapeError

from .evaluation import Evaluation, EvaluationBatch
from .policy import MlpPolicy

DEATH_POLICIES = ("prefix", "discard")


@dataclass(frozen=True)
class PointNavConfig:
    episode_len: int = 100
    dt: float = 0.1
    damping: float = 0.9
    half_width: float = 1.0
    survival_reward: float = 1.0
    torque_cost: float = 0.01
    hidden_size: int = 8
    weight_bound: float = 1.0
    death_policy: str = "prefix"

    def __post_init__(self):
        if self.episode_len < 1:
            raise ConfigError("episode_len 必须为正整数")
        if self.hidden_size < 1:
            raise ConfigError("hidden_size 必须为正整数")
        if not (self.dt > 0 and self.half_width > 0 and self.weight_bound > 0):
            raise ConfigError("dt / half_width / weight_bound 必须为正数")
        if not 0 <= self.damping <= 1:
            raise ConfigError(f"damping 应在 [0, 1] 内：{self.damping}")
        if self.torque_cost < 0:
            raise ConfigError("torque_cost 不能为负")
        if self.death_policy not in DEATH_POLICIES:
            raise ConfigError(f"未知失败处理方式：{self.death_policy}（可选 {', '.join(DEATH_POLICIES)}）")

    @property
    def policy(self) -> MlpPolicy:
        return MlpPolicy((4, self.hidden_size, self.hidden_size, 2))


def rollout_batch(genotypes: np.ndarray, config: PointNavConfig) -> EvaluationBatch:
    """对一批策略参数并行推演，逐行结果与批次切分无关。"""

    policy = config.policy
    batch = np.asarray(genotypes, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != policy.param_count:
        raise GenotypeShapeError(f"基因型批次形状 {batch.shape} 不符，长度应为 {policy.param_count}")

    size = batch.shape[0]
    params = policy.unflatten_batch(batch)
    pos = np.zeros((size, 2), dtype=np.float64)
    vel = np.zeros((size, 2), dtype=np.float64)
    fitness = np.zeros(size, dtype=np.float64)
    alive = np.ones(size, dtype=bool)
    dead = np.zeros(size, dtype=bool)
    fail_step = np.full(size, -1, dtype=np.int64)

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(config.episode_len):
            if not alive.any():
                break
            obs = np.concatenate([pos, vel], axis=1)
            action = policy.forward_batch(params, obs)
            new_vel = config.damping * vel + action * config.dt
            new_pos = pos + new_vel * config.dt

            finite = np.isfinite(new_pos).all(axis=1) & np.isfinite(new_vel).all(axis=1)
            outside = (np.abs(new_pos) > config.half_width).any(axis=1)
            failing = alive & (outside | ~finite)
            surviving = alive & ~failing

            torque = action[:, 0] * action[:, 0] + action[:, 1] * action[:, 1]
            fitness = np.where(surviving, fitness + (config.survival_reward - config.torque_cost * torque), fitness)

            fail_step[failing] = t
            dead |= alive & ~finite
            if t == 0 or config.death_policy == "discard":
                dead |= failing
            alive = surviving
            pos = np.where(surviving[:, None], new_pos, pos)
            vel = np.where(surviving[:, None], new_vel, vel)

    return EvaluationBatch(fitness=fitness, descriptors=pos, dead=dead, fail_step=fail_step)


def point_nav_episode(genotype, config: PointNavConfig | None = None) -> Evaluation:
    config = config or PointNavConfig()
    flat = np.asarray(genotype, dtype=np.float64).reshape(1, -1)
    return rollout_batch(flat, config)[0]


@dataclass(frozen=True)
class PointNavTask:
    config: PointNavConfig = PointNavConfig()

    name = "point_nav"

    @property
    def genotype_len(self) -> int:
        return self.config.policy.param_count

    @property
    def descriptor_dims(self) -> int:
        return 2

    @property
    def descriptor_lower(self) -> tuple[float, ...]:
        return (-self.config.half_width, -self.config.half_width)

    @property
    def descriptor_upper(self) -> tuple[float, ...]:
        return (self.config.half_width, self.config.half_width)

    @property
    def genotype_lower(self) -> float:
        return -self.config.weight_bound

    @property
    def genotype_upper(self) -> float:
        return self.config.weight_bound

    @property
    def default_grid_shape(self) -> tuple[int, ...]:
        return (100, 100)

    @property
    def fitness_offset(self) -> FitnessOffset:
        # 每步力矩代价不超过 2c
        return FitnessOffset(2.0 * self.config.torque_cost * self.config.episode_len)

    def evaluate(self, genotype) -> Evaluation:
        return point_nav_episode(genotype, self.config)

    def evaluate_many(self, genotypes: np.ndarray) -> EvaluationBatch:
        return rollout_batch(genotypes, self.config)

    def config_dict(self) -> dict:
        return {
            "name": self.name,
            "episode_len": self.config.episode_len,
            "dt": self.config.dt,
            "damping": self.config.damping,
            "half_width": self.config.half_width,
            "survival_reward": self.config.survival_reward,
            "torque_cost": self.config.torque_cost,
            "hidden_size": self.config.hidden_size,
            "weight_bound": self.config.weight_bound,
            "death_policy": self.config.death_policy,
            "layer_sizes": list(self.config.policy.layer_sizes),
        }
