"""
全连接 MLP 策略

参数展平顺序：逐层先权重（形状 (fan_in, fan_out)，行优先）后偏置。
所有层（含输出层）使用 tanh 激活，输出落在 [-1, 1]。
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from utils.exceptions import ConfigError, GenotypeShapeError


@dataclass(frozen=True)
class MlpPolicy:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError(f"层宽度非法：{self.layer_sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def layers(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def param_count(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layers)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def flatten(self, params: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        """[(W, b), ...] -> 一维参数向量"""

        if len(params) != len(self.layers):
            raise GenotypeShapeError(f"层数不符：{len(params)}，应为 {len(self.layers)}")
        chunks = []
        for (fan_in, fan_out), (weight, bias) in zip(self.layers, params):
            weight = np.asarray(weight, dtype=np.float64)
            bias = np.asarray(bias, dtype=np.float64)
            if weight.shape != (fan_in, fan_out) or bias.shape != (fan_out,):
                raise GenotypeShapeError(
                    f"层参数形状 {weight.shape}/{bias.shape} 不符，应为 {(fan_in, fan_out)}/{(fan_out,)}"
                )
            chunks.append(weight.reshape(-1))
            chunks.append(bias)
        return np.concatenate(chunks)

    def unflatten(self, genotype) -> list[tuple[np.ndarray, np.ndarray]]:
        flat = np.asarray(genotype, dtype=np.float64).reshape(-1)
        self._check_length(flat.shape[0])
        return [(w[0], b[0]) for w, b in self.unflatten_batch(flat[None, :])]

    def unflatten_batch(self, genotypes: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """(B, P) -> 每层 (W: (B, fan_in, fan_out), b: (B, fan_out))"""

        batch = np.asarray(genotypes, dtype=np.float64)
        if batch.ndim != 2:
            raise GenotypeShapeError(f"参数批次应为二维数组：{batch.shape}")
        self._check_length(batch.shape[1])

        out = []
        pos = 0
        for fan_in, fan_out in self.layers:
            weight = batch[:, pos : pos + fan_in * fan_out].reshape(-1, fan_in, fan_out)
            pos += fan_in * fan_out
            bias = batch[:, pos : pos + fan_out]
            pos += fan_out
            out.append((weight, bias))
        return out

    def forward_batch(self, params: list[tuple[np.ndarray, np.ndarray]], observations: np.ndarray) -> np.ndarray:
        """
        每行使用自己的权重做前向计算，返回 (B, output_size)。

        只用逐元素运算并按 fan_in 固定顺序累加，单行结果与批次切分方式无关。
        """

        x = np.asarray(observations, dtype=np.float64)
        for weight, bias in params:
            out = bias.copy()
            for i in range(weight.shape[1]):
                out += x[:, i : i + 1] * weight[:, i, :]
            x = np.tanh(out)
        return x

    def _check_length(self, length: int) -> None:
        if length != self.param_count:
            raise GenotypeShapeError(f"策略参数长度为 {length}，层结构 {self.layer_sizes} 需要 {self.param_count}")


DEFAULT_POLICY = MlpPolicy((4, 8, 8, 2))


def mlp_forward(weights, observation, policy: MlpPolicy = DEFAULT_POLICY) -> np.ndarray:
    """单个观测的前向计算，返回长度为 output_size 的动作。"""

    flat = np.asarray(weights, dtype=np.float64).reshape(1, -1)
    obs = np.asarray(observation, dtype=np.float64).reshape(1, -1)
    if obs.shape[1] != policy.input_size:
        raise GenotypeShapeError(f"观测维度为 {obs.shape[1]}，应为 {policy.input_size}")
    return policy.forward_batch(policy.unflatten_batch(flat), obs)[0]
