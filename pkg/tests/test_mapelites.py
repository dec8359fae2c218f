from __future__ import annotations

import numpy as np
import pytest

from apps.mapelites import MapElites, RunConfig, initialize, run
from apps.tasks import BenchmarkTask, EvaluationBatch
from apps.variation import RngState
from utils.exceptions import ConfigError, InitializationError, IterationError, TaskEvaluationError

from .helpers import assert_same_archive


def _trace(result):
    return [
        (r.iteration, r.cumulative_evaluations, r.qd_score, r.coverage, r.coverage_fraction, r.best_objective)
        for r in result.records
    ]


class _FlakyTask:
    """第 fail_on_call 次批量评估时抛出异常。"""

    def __init__(self, inner, fail_on_call: int):
        self.inner = inner
        self.fail_on_call = fail_on_call
        self.calls = 0

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def evaluate_many(self, genotypes):
        self.calls += 1
        if self.calls == self.fail_on_call:
            raise RuntimeError("boom")
        return self.inner.evaluate_many(genotypes)


class _AlwaysDeadTask(_FlakyTask):
    def __init__(self, inner):
        super().__init__(inner, fail_on_call=-1)

    def evaluate_many(self, genotypes):
        self.calls += 1
        batch = self.inner.evaluate_many(genotypes)
        batch.dead[:] = True
        return batch


# =============================================================================
# 配置
# =============================================================================


def test_budget_rule():
    config = RunConfig(task="sphere", batch_size=256, budget=1024, init_batch_size=256)
    assert config.iterations_planned == 3
    assert config.evaluations_planned == 1024
    uneven = RunConfig(task="sphere", batch_size=300, budget=1024, init_batch_size=256)
    assert uneven.iterations_planned == 3
    assert uneven.evaluations_planned - 1024 < 300


def test_init_batch_defaults_to_batch_size():
    assert RunConfig(task="sphere", batch_size=64, budget=640).init_batch_size == 64


@pytest.mark.parametrize(
    "kwargs",
    [
        {"batch_size": 0},
        {"init_batch_size": 0},
        {"budget": 10, "init_batch_size": 64},
        {"workers": 0},
        {"grid_shape": "10xa"},
        {"seed": -1},
    ],
)
def test_run_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(task="sphere", **kwargs)


def test_grid_dims_must_match_task():
    config = RunConfig(task="sphere", grid_shape=(5, 5, 5), budget=64, batch_size=32)
    with pytest.raises(ConfigError):
        MapElites(config)


# =============================================================================
# 初始化
# =============================================================================


def test_initialize_bounds():
    config = RunConfig(task="sphere", batch_size=128, budget=1024, grid_shape=(100, 100))
    archive = initialize(config, RngState(0))
    assert 1 <= archive.filled_count <= 128


def test_initialize_deterministic():
    config = RunConfig(task="sphere", batch_size=64, budget=640, task_options={"num_params": 10}, seed=4)
    assert_same_archive(initialize(config, RngState(4)), initialize(config, RngState(4)))


def test_initialize_retries_then_fails():
    config = RunConfig(task="sphere", batch_size=16, budget=160, init_retries=3, task_options={"num_params": 5})
    engine = MapElites(config, scoring=_AlwaysDeadTask(BenchmarkTask("sphere", 5)))
    with pytest.raises(InitializationError):
        engine.run()
    assert engine.evaluations == 3 * 16


# =============================================================================
# 主循环
# =============================================================================


def test_run_accounting():
    config = RunConfig(task="sphere", batch_size=256, budget=1024, task_options={"num_params": 10})
    result = run(config)
    assert result.iterations == 3
    assert result.total_evaluations == 1024
    assert result.overshoot == 0
    assert len(result.records) == 4
    assert result.records[0].warmup and not any(r.warmup for r in result.records[1:])
    assert [r.cumulative_evaluations for r in result.records] == [256, 512, 768, 1024]


def test_run_overshoot_recorded():
    config = RunConfig(task="sphere", batch_size=100, budget=450, init_batch_size=100, task_options={"num_params": 5})
    result = run(config)
    assert result.iterations == 4
    assert result.total_evaluations == 500
    assert result.overshoot == 50


def test_single_iteration_run():
    config = RunConfig(task="sphere", batch_size=128, init_batch_size=128, budget=256, task_options={"num_params": 20})
    result = run(config)
    assert result.iterations == 1
    assert result.archive.filled_count >= 1


def test_metrics_monotone():
    config = RunConfig(task="rastrigin", batch_size=64, budget=3200, task_options={"num_params": 10}, seed=2)
    result = run(config)
    qd = [r.qd_score for r in result.records]
    cov = [r.coverage for r in result.records]
    evals = [r.cumulative_evaluations for r in result.records]
    assert all(b >= a for a, b in zip(qd, qd[1:]))
    assert all(b >= a for a, b in zip(cov, cov[1:]))
    assert all(b > a for a, b in zip(evals, evals[1:]))
    assert all(r.qd_score >= 0 for r in result.records)
    assert result.records[-1].best_objective >= result.records[0].best_objective


def test_run_deterministic_across_workers():
    base = dict(task="sphere", batch_size=64, budget=640, task_options={"num_params": 12}, seed=7)
    serial = run(RunConfig(workers=1, **base))
    parallel = run(RunConfig(workers=3, **base))
    assert _trace(serial) == _trace(parallel)
    assert_same_archive(serial.archive, parallel.archive)


def test_point_nav_deterministic_across_workers():
    base = dict(
        task="point_nav",
        batch_size=32,
        budget=160,
        grid_shape=(10, 10),
        task_options={"hidden_size": 4, "episode_len": 30},
        seed=3,
    )
    serial = run(RunConfig(workers=1, **base))
    parallel = run(RunConfig(workers=2, **base))
    assert _trace(serial) == _trace(parallel)
    assert_same_archive(serial.archive, parallel.archive)


def test_seeds_differ():
    base = dict(task="sphere", batch_size=32, budget=160, task_options={"num_params": 8})
    a = run(RunConfig(seed=0, **base))
    b = run(RunConfig(seed=1, **base))
    assert not np.array_equal(a.archive.fitness, b.archive.fitness, equal_nan=True)


def test_iteration_error_carries_index():
    config = RunConfig(task="sphere", batch_size=16, budget=160, task_options={"num_params": 4})
    engine = MapElites(config, scoring=_FlakyTask(BenchmarkTask("sphere", 4), fail_on_call=3))
    with pytest.raises(IterationError) as excinfo:
        engine.run()
    assert excinfo.value.iteration == 2
    assert isinstance(excinfo.value.cause, TaskEvaluationError)
    assert "boom" in str(excinfo.value)


def test_fixed_iteration_mode():
    config = RunConfig(task="sphere", batch_size=64, iterations=5, budget=0, task_options={"num_params": 4})
    result = run(config)
    assert result.iterations == 5
    assert sum(r.batch_size for r in result.records[1:]) == 320


def test_evaluation_batch_helpers():
    task = BenchmarkTask("sphere", 3)
    batch = task.evaluate_many(np.zeros((2, 3)))
    assert len(EvaluationBatch.concatenate([batch, batch], 2)) == 4
