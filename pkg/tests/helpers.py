"""测试用参照实现。"""

from __future__ import annotations

import math

import numpy as np

from apps.archive import GridArchive, cell_index


def sequential_insert(archive: GridArchive, genotypes, fitnesses, descriptors, dead=None) -> GridArchive:
    """逐个插入：空单元或严格更优才替换。"""

    n = len(fitnesses)
    dead = [False] * n if dead is None else list(dead)
    for i in range(n):
        if dead[i]:
            continue
        cell = cell_index(archive.tessellation, descriptors[i])
        incumbent = archive.fitness[cell]
        if math.isnan(incumbent) or fitnesses[i] > incumbent:
            if math.isnan(incumbent):
                archive.filled_count += 1
            archive.fitness[cell] = fitnesses[i]
            archive.descriptors[cell] = descriptors[i]
            archive.genotypes[cell] = genotypes[i]
    return archive


def assert_same_archive(a: GridArchive, b: GridArchive) -> None:
    np.testing.assert_array_equal(a.fitness, b.fitness)
    np.testing.assert_array_equal(a.descriptors, b.descriptors)
    np.testing.assert_array_equal(a.genotypes, b.genotypes)
    assert a.filled_count == b.filled_count


def reference_mlp(layers, weights, observation):
    """矩阵乘法形式的前向计算。"""

    x = np.asarray(observation, dtype=np.float64)
    pos = 0
    for fan_in, fan_out in layers:
        w = weights[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = weights[pos : pos + fan_out]
        pos += fan_out
        x = np.tanh(x @ w + b)
    return x


def clone_archive(archive: GridArchive) -> GridArchive:
    other = GridArchive(archive.tessellation, archive.genotype_len)
    other.fitness[:] = archive.fitness
    other.descriptors[:] = archive.descriptors
    other.genotypes[:] = archive.genotypes
    other.filled_count = archive.filled_count
    return other


def archive_bytes(archive: GridArchive) -> tuple:
    return (
        archive.fitness.tobytes(),
        archive.descriptors.tobytes(),
        archive.genotypes.tobytes(),
        archive.filled_count,
    )
