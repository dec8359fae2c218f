from __future__ import annotations

import csv
import dataclasses
import io
import json
import os

import numpy as np
import pytest
from django.core.management import call_command, execute_from_command_line
from django.core.management.base import CommandError
from PIL import Image

from apps.archive import GridArchive, GridTessellation
from apps.archive.exporters import write_archive_csv, write_archive_meta
from apps.harness import runner
from apps.harness.heatmap import bucket_of, export_heatmap
from apps.mapelites import RunConfig
from apps.metrics import MetricsRecord
from utils.exceptions import InitializationError, IterationError, UnsupportedDimensionsError
from utils.file_utils import LOCK_FILENAME

SMALL_RUN = {"task": "sphere", "batch_size": 64, "budget": 320, "num_params": 8, "seed": 1, "workers": 1}


def _run(out, **overrides):
    options = {**SMALL_RUN, **overrides}
    call_command("run", out=str(out), stdout=io.StringIO(), **options)
    return out


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# =============================================================================
# qd run
# =============================================================================


def test_run_writes_artifacts(tmp_path):
    out = _run(tmp_path / "r")
    for name in ("metrics.csv", "timings.csv", "archive.csv", "archive.json", "genotypes.npz", "meta.json"):
        assert (out / name).is_file(), name
    assert not (out / LOCK_FILENAME).exists()

    metrics = _rows(out / "metrics.csv")
    # 4 次迭代 + 初始化
    assert len(metrics) == 5
    assert list(metrics[0]) == [
        "iteration",
        "cumulative_evaluations",
        "qd_score",
        "coverage",
        "coverage_fraction",
        "best_objective",
    ]
    assert [int(r["cumulative_evaluations"]) for r in metrics] == [64, 128, 192, 256, 320]

    timings = _rows(out / "timings.csv")
    assert [r["warmup"] for r in timings] == ["1", "0", "0", "0", "0"]

    meta = json.loads((out / "meta.json").read_text(encoding="utf-8"))
    assert meta["rng_algorithm"] == "philox4x64-10+box-muller"
    assert meta["seed"] == 1
    assert meta["iterations"] == 4
    assert meta["total_evaluations"] == 320
    assert meta["config"]["task_options"] == {"num_params": 8}
    assert meta["task"]["name"] == "sphere"
    assert "numpy" in meta["software"]
    assert meta["timing"]["total_wall_clock"] > 0


def test_run_byte_identical_across_reruns_and_workers(tmp_path):
    a = _run(tmp_path / "a")
    b = _run(tmp_path / "b")
    c = _run(tmp_path / "c", workers=2)
    for name in ("metrics.csv", "archive.csv", "archive.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_run_genotype_csv_format(tmp_path):
    out = _run(tmp_path / "r", genotype_format="csv")
    header = (out / "genotypes.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("cell_index,gene_0,")


def test_run_missing_task_is_usage_error(tmp_path):
    with pytest.raises(CommandError, match="--task"):
        call_command("run", out=str(tmp_path), stdout=io.StringIO())


def test_run_missing_task_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        execute_from_command_line(["qd", "run", "--out", str(tmp_path)])
    assert excinfo.value.code == 2


def test_run_invalid_config_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        execute_from_command_line(["qd", "run", "--task", "sphere", "--batch-size", "0", "--out", str(tmp_path)])
    assert excinfo.value.code == 1


def test_config_file_precedence(tmp_path):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps({"task": "sphere", "batch_size": 32, "budget": 96, "num_params": 4}), encoding="utf-8")
    out = tmp_path / "r"
    call_command("run", config=str(config), budget=128, workers=1, out=str(out), stdout=io.StringIO())
    meta = json.loads((out / "meta.json").read_text(encoding="utf-8"))
    assert meta["config"]["batch_size"] == 32
    assert meta["config"]["budget"] == 128
    assert meta["total_evaluations"] == 128


def test_config_file_unknown_key(tmp_path):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps({"task": "sphere", "colour": "red"}), encoding="utf-8")
    with pytest.raises(CommandError, match="colour"):
        call_command("run", config=str(config), out=str(tmp_path / "r"), stdout=io.StringIO())


def test_output_dir_lock(tmp_path):
    (tmp_path / LOCK_FILENAME).write_text("123", encoding="utf-8")
    with pytest.raises(CommandError):
        _run(tmp_path)
    assert not (tmp_path / "metrics.csv").exists()


def test_partial_files_removed_on_failure(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(runner, "write_genotypes", broken)
    config = RunConfig(task="sphere", batch_size=16, budget=48, task_options={"num_params": 4})
    with pytest.raises(OSError):
        runner.run_single(config, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == []


def test_init_retries_from_settings(tmp_path, settings):
    settings.QD_SETTINGS = {**settings.QD_SETTINGS, "INIT_RETRIES": 3}
    meta = json.loads((_run(tmp_path / "a") / "meta.json").read_text(encoding="utf-8"))
    assert meta["config"]["init_retries"] == 3

    meta = json.loads((_run(tmp_path / "b", init_retries=5) / "meta.json").read_text(encoding="utf-8"))
    assert meta["config"]["init_retries"] == 5


def test_init_retries_flag_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        execute_from_command_line(
            ["qd", "run", "--task", "sphere", "--init-retries", "0", "--out", str(tmp_path)]
        )
    assert excinfo.value.code == 1


def test_meta_best_elite(tmp_path):
    meta = json.loads((_run(tmp_path) / "meta.json").read_text(encoding="utf-8"))
    best = meta["final"]["best_elite"]
    metrics = _rows(tmp_path / "metrics.csv")
    assert best["fitness"] == pytest.approx(float(metrics[-1]["best_objective"]))
    assert len(best["descriptor"]) == 2

    archive = {int(r["cell_index"]): float(r["fitness"]) for r in _rows(tmp_path / "archive.csv")}
    assert best["cell_index"] == max(archive, key=archive.get)


def test_best_elite_empty_archive(unit_grid):
    assert runner.best_elite(GridArchive(unit_grid, genotype_len=2)) is None


# =============================================================================
# qd ablate
# =============================================================================

SMALL_SWEEP = {
    "task": "sphere",
    "batch_sizes": "16,32",
    "replications": 3,
    "budget": 96,
    "num_params": 4,
    "workers": 1,
}


def test_ablate_outputs(tmp_path):
    call_command("ablate", out=str(tmp_path), xlsx=True, stdout=io.StringIO(), **SMALL_SWEEP)

    for b in (16, 32):
        for r in range(3):
            assert (tmp_path / f"b{b}_r{r}" / "metrics.csv").is_file()
    rows = _rows(tmp_path / "sweep_metrics.csv")
    # 初始化批次取最大批大小 32；b16：初始化 + 4 次迭代；b32：初始化 + 2 次迭代
    assert len(rows) == 3 * 5 + 3 * 3
    assert set(rows[0]) == {
        "batch_size",
        "replication",
        "seed",
        "iteration",
        "cumulative_evaluations",
        "qd_score",
        "coverage",
        "best_objective",
    }
    assert len(_rows(tmp_path / "sweep_timings.csv")) == len(rows)

    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["spec"]["init_batch_size"] == 32
    assert summary["per_batch_size"]["16"]["iterations"] == 4
    assert summary["per_batch_size"]["32"]["iterations"] == 2
    assert summary["per_batch_size"]["16"]["runs"] == 3
    assert summary["bonferroni_factor"] == 1
    (comparison,) = summary["comparisons"]
    assert comparison["p_corrected"] == comparison["p_value"]
    assert summary["failed_runs"] == []

    acceptance = summary["acceptance"]
    assert acceptance["iteration_ratio"] == pytest.approx(0.5)
    assert acceptance["monotone"] is True
    assert len(acceptance["iqr_overlap"]) == 1
    assert acceptance["min_p_corrected"] == comparison["p_corrected"]
    assert (tmp_path / "timings.json").is_file()
    assert (tmp_path / "summary.xlsx").is_file()

    # 每次运行的最终累计评估数与其 meta.json 一致
    meta = json.loads((tmp_path / "b32_r1" / "meta.json").read_text(encoding="utf-8"))
    finals = [r for r in rows if r["batch_size"] == "32" and r["replication"] == "1"]
    assert int(finals[-1]["cumulative_evaluations"]) == meta["total_evaluations"]


def test_ablate_deterministic(tmp_path):
    call_command("ablate", out=str(tmp_path / "a"), stdout=io.StringIO(), **SMALL_SWEEP)
    call_command("ablate", out=str(tmp_path / "b"), stdout=io.StringIO(), **SMALL_SWEEP)
    for name in ("sweep_metrics.csv", "summary.json", "b16_r2/archive.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_ablate_partial_failure_exit_code(tmp_path, monkeypatch):
    original = runner.run_single

    def fails_at_32(config, *args, **kwargs):
        if config.batch_size == 32:
            raise InitializationError("初始化重试 10 次后仍没有可加入档案的候选解")
        return original(config, *args, **kwargs)

    monkeypatch.setattr(runner, "run_single", fails_at_32)
    with pytest.raises(CommandError) as excinfo:
        call_command("ablate", out=str(tmp_path), stdout=io.StringIO(), **SMALL_SWEEP)
    assert excinfo.value.returncode == 3
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert len(summary["failed_runs"]) == 3
    assert {r["batch_size"] for r in summary["failed_runs"]} == {32}
    assert summary["per_batch_size"]["16"]["runs"] == 3
    assert summary["per_batch_size"]["32"]["runs"] == 0
    assert summary["comparisons"][0]["p_value"] is None
    assert summary["acceptance"]["batch_size_invariant"] is False


def test_ablate_budget_smaller_than_init_batch(tmp_path):
    options = {**SMALL_SWEEP, "batch_sizes": "16,200"}
    with pytest.raises(CommandError, match="200"):
        call_command("ablate", out=str(tmp_path), stdout=io.StringIO(), **options)


def test_ablation_shares_initial_batch_across_batch_sizes():
    spec = runner.AblationSpec(task="sphere", batch_sizes=(256, 64, 4096, 1024), budget=102400, replications=5)
    assert spec.init_batch_size == 4096
    small, large = spec.run_config(64, 2), spec.run_config(4096, 2)
    assert small.init_batch_size == large.init_batch_size == 4096
    assert small.seed == large.seed == 2
    # (102400 - 4096) / 64 = 1536，(102400 - 4096) / 4096 = 24
    assert large.iterations_planned * 64 == small.iterations_planned

    explicit = runner.AblationSpec(
        task="sphere", batch_sizes=(64, 256), budget=1024, replications=1, init_batch_size=64
    )
    assert explicit.init_batch_size == 64


def test_ablation_six_pairwise_comparisons():
    spec = runner.AblationSpec(task="sphere", batch_sizes=(64, 256, 1024, 4096), budget=102400, replications=5)
    report = runner.SweepReport(spec=spec, runs=[])
    comparisons, factor = report.comparisons()
    assert len(comparisons) == 6
    assert factor == 6
    assert spec.run_config(1024, 3).seed == 3


def _sweep_run(batch_size, replication, final, iterations=4):
    records = [
        MetricsRecord(
            iteration=i,
            cumulative_evaluations=(i + 1) * batch_size,
            qd_score=final * (i + 1) / (iterations + 1),
            coverage=i + 1,
            coverage_fraction=(i + 1) / 100,
            best_objective=-1.0,
            iteration_wall_clock=0.01,
            evals_per_second=batch_size / 0.01,
            batch_size=batch_size,
        )
        for i in range(iterations + 1)
    ]
    return runner.SweepRun(batch_size, replication, replication, records=records, iterations=iterations)


def test_acceptance_separated_samples_are_not_invariant():
    spec = runner.AblationSpec(task="sphere", batch_sizes=(8, 16), budget=256, replications=5)
    runs = [_sweep_run(8, r, 100.0 + r) for r in range(5)]
    runs += [_sweep_run(16, r, 200.0 + r, iterations=2) for r in range(5)]
    acceptance = runner.SweepReport(spec=spec, runs=runs).acceptance()
    # 完全分离的 5 对 5 样本：精确双侧 p = 2 / 252
    assert acceptance["min_p_corrected"] == pytest.approx(2 / 252)
    assert acceptance["significant_pairs"] == [[8, 16]]
    assert acceptance["iqr_overlap"][0]["overlap"] is False
    assert acceptance["batch_size_invariant"] is False
    assert acceptance["iteration_ratio"] == pytest.approx(0.5)
    assert acceptance["monotone"] is True


def test_acceptance_overlapping_samples_are_invariant():
    spec = runner.AblationSpec(task="sphere", batch_sizes=(8, 16), budget=256, replications=5)
    runs = [_sweep_run(8, r, 100.0 + 2 * r) for r in range(5)]
    runs += [_sweep_run(16, r, 101.0 + 2 * r, iterations=2) for r in range(5)]
    acceptance = runner.SweepReport(spec=spec, runs=runs).acceptance()
    assert acceptance["significant_pairs"] == []
    assert acceptance["iqr_overlap"][0]["overlap"] is True
    assert acceptance["batch_size_invariant"] is True


def test_acceptance_detects_decreasing_trace():
    spec = runner.AblationSpec(task="sphere", batch_sizes=(8, 16), budget=256, replications=1)
    run = _sweep_run(8, 0, 100.0)
    run.records[2] = dataclasses.replace(run.records[2], qd_score=-1.0)
    acceptance = runner.SweepReport(spec=spec, runs=[run]).acceptance()
    assert acceptance["monotone"] is False


# =============================================================================
# qd throughput
# =============================================================================


def test_throughput_iterations_mode(tmp_path):
    call_command(
        "throughput",
        task="sphere",
        batch_sizes="8,16",
        iterations=3,
        num_params=4,
        workers=1,
        out=str(tmp_path),
        stdout=io.StringIO(),
    )
    rows = _rows(tmp_path / "throughput.csv")
    assert [r["batch_size"] for r in rows] == ["8", "16"]
    assert [r["evaluations"] for r in rows] == ["24", "48"]
    assert all(r["status"] == "ok" for r in rows)
    assert all(float(r["evals_per_second"]) > 0 for r in rows)


def test_throughput_budget_mode(tmp_path):
    config = RunConfig(task="sphere", batch_size=8, budget=64, task_options={"num_params": 4})
    points = runner.run_throughput(config, [8, 16], tmp_path, mode="budget")
    assert [p.evaluations for p in points] == [64, 64]
    assert [p.iterations for p in points] == [7, 3]


def test_throughput_reports_oom_and_continues(tmp_path, monkeypatch):
    original = runner.MapElites.run

    def maybe_oom(self):
        if self.config.batch_size == 16:
            raise IterationError(1, MemoryError())
        return original(self)

    monkeypatch.setattr(runner.MapElites, "run", maybe_oom)
    config = RunConfig(task="sphere", batch_size=8, iterations=2, budget=0, task_options={"num_params": 4})
    points = runner.run_throughput(config, [8, 16, 32], tmp_path, iterations=2)
    assert [p.status for p in points] == ["ok", "oom", "ok"]
    assert _rows(tmp_path / "throughput.csv")[1]["status"] == "oom"


# =============================================================================
# qd heatmap
# =============================================================================


def _write_archive(tmp_path, shape, cells_fitness):
    dims = len(shape)
    tess = GridTessellation([0.0] * dims, [1.0] * dims, shape)
    archive = GridArchive(tess, genotype_len=1)
    for cell, fitness in cells_fitness.items():
        idx = np.unravel_index(cell, shape)
        descriptor = [(i + 0.5) / s for i, s in zip(idx, shape)]
        archive.add_batch([[0.0]], [fitness], [descriptor])
    write_archive_csv(archive, tmp_path / "archive.csv")
    write_archive_meta(archive, tmp_path / "archive.json")
    return tmp_path / "archive.csv"


def _pixels(path):
    with Image.open(path) as img:
        return np.asarray(img)


def test_heatmap_empty_archive(tmp_path):
    legend = export_heatmap(_write_archive(tmp_path, (4, 5), {}), tmp_path / "h.pgm", cell_pixels=2)
    pixels = _pixels(tmp_path / "h.pgm")
    assert pixels.shape == (8, 10)
    assert (pixels == 0).all()
    assert legend["min"] is None


def test_heatmap_single_cell_top_left(tmp_path):
    export_heatmap(_write_archive(tmp_path, (4, 5), {0: -2.0}), tmp_path / "h.pgm", cell_pixels=3)
    pixels = _pixels(tmp_path / "h.pgm")
    assert (pixels[:3, :3] == 255).all()
    assert pixels.sum() == 255 * 9


def test_heatmap_round_trip_and_brightest_cell(tmp_path, rng):
    cells = {int(c): float(f) for c, f in zip(rng.choice(100, 30, replace=False), rng.normal(size=30))}
    csv_path = _write_archive(tmp_path, (10, 10), cells)
    legend = export_heatmap(csv_path, tmp_path / "h.pgm", cell_pixels=2)
    legend_file = json.loads((tmp_path / "h.json").read_text(encoding="utf-8"))
    assert legend_file == legend

    pixels = _pixels(tmp_path / "h.pgm")
    for cell, fitness in cells.items():
        row, col = divmod(cell, 10)
        assert pixels[row * 2, col * 2] == bucket_of(fitness, legend)

    best = max(cells, key=cells.get)
    row, col = divmod(best, 10)
    assert pixels[row * 2, col * 2] == pixels.max() == 255


def test_heatmap_projects_trailing_dims(tmp_path):
    shape = (2, 3, 4)
    cells = {int(np.ravel_multi_index((1, 2, 0), shape)): 1.0, int(np.ravel_multi_index((1, 2, 3), shape)): 5.0,
             int(np.ravel_multi_index((0, 0, 1), shape)): 3.0}
    legend = export_heatmap(_write_archive(tmp_path, shape, cells), tmp_path / "h.pgm", cell_pixels=1)
    pixels = _pixels(tmp_path / "h.pgm")
    assert legend["projected_shape"] == [2, 3]
    assert pixels[1, 2] == 255
    assert pixels[0, 0] == bucket_of(3.0, legend)


def test_heatmap_one_dimensional(tmp_path):
    export_heatmap(_write_archive(tmp_path, (6,), {2: 1.0}), tmp_path / "h.pgm", cell_pixels=1)
    assert _pixels(tmp_path / "h.pgm").shape == (1, 6)


def test_heatmap_rejects_high_dimensions(tmp_path):
    with pytest.raises(UnsupportedDimensionsError):
        export_heatmap(_write_archive(tmp_path, (2, 2, 2, 2, 2), {}), tmp_path / "h.pgm")


def test_heatmap_command(tmp_path):
    _run(tmp_path)
    call_command("heatmap", out=str(tmp_path), stdout=io.StringIO())
    assert (tmp_path / "heatmap.pgm").is_file()
    legend = json.loads((tmp_path / "heatmap.json").read_text(encoding="utf-8"))
    assert legend["shape"] == [100, 100]


# =============================================================================
# 日志配置
# =============================================================================


def test_logging_formatters():
    from config.settings import development, production

    assert development.LOGGING["handlers"]["console"]["formatter"] == "verbose"
    assert production.LOGGING["handlers"]["console"]["formatter"] == "json"
    assert production.LOGGING["formatters"]["json"]["()"] == "pythonjsonlogger.jsonlogger.JsonFormatter"


@pytest.mark.slow
def test_point_nav_run_reproducible_across_workers(tmp_path):
    options = {
        "task": "point_nav",
        "batch_size": 32,
        "budget": 160,
        "episode_len": 20,
        "hidden_size": 4,
        "seed": 7,
    }
    a = _run(tmp_path / "a", workers=1, **options)
    b = _run(tmp_path / "b", workers=3, **options)
    for name in ("metrics.csv", "archive.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    meta = json.loads((a / "meta.json").read_text(encoding="utf-8"))
    assert meta["task"]["episode_len"] == 20


# =============================================================================
# 完整规模实验（-m slow）
# =============================================================================

ABLATION_BATCH_SIZES = (64, 256, 1024, 4096)


@pytest.mark.slow
@pytest.mark.parametrize("task", ["sphere", "rastrigin"])
def test_batch_size_sweep_full_scale(tmp_path, task):
    spec = runner.AblationSpec(
        task=task,
        task_options={"num_params": 100},
        grid_shape=(100, 100),
        batch_sizes=ABLATION_BATCH_SIZES,
        budget=102400,
        replications=5,
    )
    report = runner.run_ablation(spec, tmp_path)
    assert report.failed == []

    iterations = {}
    for b in ABLATION_BATCH_SIZES:
        for r in range(5):
            meta = json.loads((tmp_path / f"b{b}_r{r}" / "meta.json").read_text(encoding="utf-8"))
            assert meta["total_evaluations"] <= 102400
            iterations.setdefault(b, meta["iterations"])
            assert meta["iterations"] == iterations[b]
    # 1536 次迭代对 24 次迭代
    assert iterations[4096] * 64 <= iterations[64]

    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    acceptance = summary["acceptance"]
    assert acceptance["iteration_ratio"] <= 1 / 64
    assert acceptance["monotone"] is True
    assert len(summary["comparisons"]) == 6
    assert all(c["method"] == "exact" for c in summary["comparisons"])

    if not acceptance["batch_size_invariant"]:
        medians = {b: row["qd_score"]["median"] for b, row in summary["per_batch_size"].items()}
        pytest.xfail(
            f"{task}: 最终 QD-score 中位数 {medians}，显著差异 {acceptance['significant_pairs']}，"
            f"最小校正 p={acceptance['min_p_corrected']}"
        )


def _throughput(out, workers):
    call_command(
        "throughput",
        task="point_nav",
        batch_sizes="64,128,256,512,1024,2048,4096",
        iterations=100,
        workers=workers,
        out=str(out),
        stdout=io.StringIO(),
    )
    rows = _rows(out / "throughput.csv")
    assert all(r["status"] == "ok" for r in rows)
    return {int(r["batch_size"]): float(r["evals_per_second"]) for r in rows}


@pytest.mark.slow
def test_point_nav_throughput_scaling(tmp_path):
    cores = os.cpu_count() or 1
    rates = _throughput(tmp_path / "cores", cores)
    assert [*rates] == [64, 128, 256, 512, 1024, 2048, 4096]
    # 平台期之前的最大吞吐量
    assert max(rates.values()) >= 4 * rates[64]

    if cores < 2:
        pytest.skip("单核机器上无法比较工作线程数")
    call_command(
        "throughput",
        task="point_nav",
        batch_sizes="4096",
        iterations=100,
        workers=1,
        out=str(tmp_path / "single"),
        stdout=io.StringIO(),
    )
    (single,) = _rows(tmp_path / "single" / "throughput.csv")
    assert rates[4096] / float(single["evals_per_second"]) >= 2
