"""共享夹具。"""

from __future__ import annotations

import numpy as np
import pytest

from apps.archive import GridArchive, GridTessellation


@pytest.fixture
def unit_grid() -> GridTessellation:
    return GridTessellation((0.0, 0.0), (1.0, 1.0), (10, 10))


@pytest.fixture
def small_archive(unit_grid) -> GridArchive:
    return GridArchive(unit_grid, genotype_len=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
