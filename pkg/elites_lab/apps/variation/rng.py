"""
基于计数器的可复现随机流

- 位生成器：Philox-4x64（numpy.random.Philox），key = (seed, 流编号)，
  counter = (0, 0, state.counter, slot)，每个 (迭代, 槽位) 拥有独立随机流。
- 正态分布：Box-Muller 余弦分支，z = sqrt(-2·log1p(-u1))·cos(2π·u2)，
  只依赖均匀双精度流，不依赖 numpy 的 ziggurat 实现。
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from utils.exceptions import ConfigError

RNG_ALGORITHM = "philox4x64-10+box-muller"

_U64 = (1 << 64) - 1


class Stream(enum.IntEnum):
    """随机流用途编号（写入 Philox key 的第二个字）。"""

    INIT = 0
    SELECTION = 1
    VARIATION = 2


@dataclass(frozen=True)
class RngState:
    """(seed, counter) 决定全部抽样序列。"""

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise ConfigError(f"随机种子必须是 64 位无符号整数：{self.seed}")
        if not 0 <= self.counter <= _U64:
            raise ConfigError(f"流计数器必须是 64 位无符号整数：{self.counter}")

    def generator(self, stream: Stream, slot: int = 0) -> np.random.Generator:
        key = np.array([self.seed, int(stream)], dtype=np.uint64)
        counter = np.array([0, 0, self.counter, slot], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))

    def advance(self, steps: int = 1) -> "RngState":
        return RngState(self.seed, self.counter + steps)


def box_muller(uniforms: np.ndarray) -> np.ndarray:
    """把最后一维长度为 2k 的均匀数组变换为长度 k 的标准正态数组。"""

    u = np.asarray(uniforms, dtype=np.float64)
    half = u.shape[-1] // 2
    u1, u2 = u[..., :half], u[..., half : 2 * half]
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def standard_normal(gen: np.random.Generator, size: int) -> np.ndarray:
    """从单个随机流抽取 size 个标准正态数。"""

    return box_muller(gen.random(2 * size))


def slot_normals(rng: RngState, stream: Stream, num_slots: int, size: int) -> np.ndarray:
    """
    每个槽位独立抽取 size 个标准正态数，返回 (num_slots, size)。

    槽位 j 的均匀数只依赖 (seed, 流编号, counter, j)，与批大小及并行度无关。
    """

    uniforms = np.empty((num_slots, 2 * size), dtype=np.float64)
    for slot in range(num_slots):
        uniforms[slot] = rng.generator(stream, slot).random(2 * size)
    return box_muller(uniforms)
