"""
实验执行

- run_single：单次运行并写出 metrics.csv / timings.csv / archive.csv / archive.json / 基因型 / meta.json
- run_ablation：批大小 × 重复次数的消融实验（顺序执行），写出长表 CSV 与统计汇总
- run_throughput：吞吐量实验（固定迭代次数或固定预算）

确定性文件只取决于 (配置, 种子)，墙钟数据单独写入 timings 文件与 meta.json 的 timing 段。
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import tablib
from django.utils import timezone

from apps.archive.exporters import write_archive_csv, write_archive_meta, write_genotypes
from apps.mapelites import MapElites, RunConfig, RunResult
from apps.metrics import MetricsRecord, bonferroni, evals_per_second, rank_sum_test, summarize
from apps.variation import RNG_ALGORITHM
from utils.exceptions import ConfigError, IterationError, QDError, format_error
from utils.file_utils import PartialOutput, prepare_output_dir, write_bytes, write_json
from utils.validators import GENOTYPE_FORMATS

from .resources import (
    MetricsResource,
    SweepMetricsResource,
    SweepTimingsResource,
    ThroughputResource,
    TimingsResource,
    export_csv,
)

logger = logging.getLogger(__name__)

PACKAGE_NAME = "map-elites-lab"
SIGNIFICANCE_LEVEL = 0.05


def software_versions() -> dict:
    try:
        version = metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        version = "0+unknown"
    return {
        PACKAGE_NAME: version,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


# =============================================================================
# 单次运行
# =============================================================================


def best_elite(archive) -> dict | None:
    """最佳精英所在单元、描述子与适应度；档案为空时为 None。"""

    if archive.filled_count == 0:
        return None
    cell = int(np.nanargmax(archive.fitness))
    elite = archive.elite(cell)
    return {"cell_index": cell, "descriptor": list(elite.descriptor), "fitness": elite.fitness}


def build_meta(config: RunConfig, engine: MapElites, result: RunResult, started_at: str) -> dict:
    final = result.final
    return {
        "config": config.to_dict(),
        "task": engine.scoring.config_dict(),
        "tessellation": engine.tessellation.to_dict(),
        "seed": config.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "software": software_versions(),
        "fitness_offset": float(engine.offset.value),
        "iterations": result.iterations,
        "records": len(result.records),
        "init_attempts": result.init_attempts,
        "total_evaluations": result.total_evaluations,
        "overshoot": result.overshoot,
        "final": {
            "qd_score": final.qd_score,
            "coverage": final.coverage,
            "coverage_fraction": final.coverage_fraction,
            "best_objective": final.best_objective,
            "best_elite": best_elite(result.archive),
        },
        "timing": {
            "started_at": started_at,
            "total_wall_clock": result.total_wall_clock,
            "evals_per_second": _post_init_rate(result.records),
        },
    }


def _post_init_rate(records: list[MetricsRecord], skip: int = 1) -> float | None:
    timed = [r for r in records[skip:] if r.iteration_wall_clock > 0]
    if not timed:
        return None
    return evals_per_second([r.batch_size for r in timed], [r.iteration_wall_clock for r in timed])


def run_single(config: RunConfig, out_dir: Path, genotype_format: str = "npz") -> RunResult:
    """
    执行一次运行并写出全部产物。

    任一步骤失败时删除本次已写出的文件，异常继续向上抛出。
    """

    if genotype_format not in GENOTYPE_FORMATS:
        raise ConfigError(f"不支持的基因型导出格式：{genotype_format}")
    out = prepare_output_dir(out_dir)
    started_at = timezone.now().isoformat()

    with PartialOutput() as files:
        engine = MapElites(config)
        result = engine.run()

        export_csv(MetricsResource, result.records, files.track(out / "metrics.csv"))
        export_csv(TimingsResource, result.records, files.track(out / "timings.csv"))
        write_archive_csv(result.archive, files.track(out / "archive.csv"))
        write_archive_meta(result.archive, files.track(out / "archive.json"))
        write_genotypes(result.archive, files.track(out / f"genotypes.{genotype_format}"), genotype_format)
        write_json(files.track(out / "meta.json"), build_meta(config, engine, result, started_at))

    logger.info(
        "运行产物已写出",
        extra={"out": str(out), "iterations": result.iterations, "evaluations": result.total_evaluations},
    )
    return result


# =============================================================================
# 批大小消融实验
# =============================================================================


@dataclass(frozen=True)
class AblationSpec:
    """
    消融实验配置：所有运行共享任务、网格与预算 H；
    每个批大小使用同一组种子 base_seed + replication。

    init_batch_size 未给出时取最大批大小，同一种子下各批大小从同一个初始档案出发。
    """

    task: str
    batch_sizes: tuple[int, ...]
    budget: int
    replications: int
    base_seed: int = 0
    workers: int = 1
    grid_shape: tuple[int, ...] | None = None
    init_batch_size: int | None = None
    sigma1: float = 0.01
    sigma2: float = 0.2
    init_retries: int = 10
    task_options: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.batch_sizes)
        if not sizes or any(b < 1 for b in sizes):
            raise ConfigError(f"批大小列表非法：{self.batch_sizes}")
        if len(set(sizes)) != len(sizes):
            raise ConfigError(f"批大小列表存在重复：{self.batch_sizes}")
        if self.replications < 1:
            raise ConfigError("replications 至少为 1")
        object.__setattr__(self, "batch_sizes", sizes)
        if self.init_batch_size is None:
            object.__setattr__(self, "init_batch_size", max(sizes))
        if self.init_batch_size > self.budget:
            raise ConfigError(f"评估预算 {self.budget} 小于初始批次 {self.init_batch_size}")

    def run_config(self, batch_size: int, replication: int) -> RunConfig:
        return RunConfig(
            task=self.task,
            task_options=dict(self.task_options),
            grid_shape=self.grid_shape,
            batch_size=batch_size,
            budget=self.budget,
            init_batch_size=self.init_batch_size,
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            seed=self.base_seed + replication,
            workers=self.workers,
            init_retries=self.init_retries,
        )

    def to_dict(self) -> dict:
        payload = dataclasses.asdict(self)
        payload["batch_sizes"] = list(self.batch_sizes)
        payload["grid_shape"] = list(self.grid_shape) if self.grid_shape else None
        return payload


@dataclass
class SweepRun:
    batch_size: int
    replication: int
    seed: int
    records: list[MetricsRecord] = field(default_factory=list)
    iterations: int = 0
    total_evaluations: int = 0
    total_wall_clock: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def final(self) -> MetricsRecord | None:
        return self.records[-1] if self.records else None


@dataclass
class SweepRow:
    """长表中的一行：运行键 + 该次迭代的指标记录。"""

    batch_size: int
    replication: int
    seed: int
    record: MetricsRecord
    elapsed: float


@dataclass
class SweepReport:
    spec: AblationSpec
    runs: list[SweepRun]

    @property
    def failed(self) -> list[SweepRun]:
        return [r for r in self.runs if not r.ok]

    def rows(self) -> list[SweepRow]:
        out = []
        for run in self.runs:
            elapsed = 0.0
            for record in run.records:
                elapsed += record.iteration_wall_clock
                out.append(SweepRow(run.batch_size, run.replication, run.seed, record, elapsed))
        return out

    def _finals(self, batch_size: int, attr: str) -> list[float]:
        return [
            getattr(r.final, attr)
            for r in self.runs
            if r.ok and r.batch_size == batch_size and getattr(r.final, attr) is not None
        ]

    def comparisons(self) -> tuple[list[dict], int]:
        """两两秩和检验（最终 QD-score），同时给出原始与 Bonferroni 校正后的 p 值。"""

        pairs = list(itertools.combinations(self.spec.batch_sizes, 2))
        factor = max(1, len(pairs))
        out = []
        for a, b in pairs:
            entry = {"batch_size_a": a, "batch_size_b": b}
            try:
                test = rank_sum_test(self._finals(a, "qd_score"), self._finals(b, "qd_score"))
            except ConfigError as exc:
                entry.update({"u": None, "p_value": None, "p_corrected": None, "method": None})
                entry["error"] = format_error(exc)
            else:
                entry.update(
                    {
                        "u": test.u,
                        "p_value": test.p_value,
                        "p_corrected": bonferroni(test.p_value, factor),
                        "method": test.method,
                    }
                )
            out.append(entry)
        return out, factor

    def _iterations(self, batch_size: int) -> int | None:
        done = [r for r in self.runs if r.ok and r.batch_size == batch_size]
        return done[0].iterations if done else None

    def acceptance(self, comparisons: list[dict] | None = None, alpha: float = SIGNIFICANCE_LEVEL) -> dict:
        """
        批大小不变性检查：

        - 各批大小最终 QD-score 的四分位区间两两重叠，且校正后 p 值均大于 alpha
        - 最大批大小的迭代次数与最小批大小之比
        - 每次运行的 QD-score 与覆盖单元数轨迹单调不减
        """

        if comparisons is None:
            comparisons, _ = self.comparisons()
        overlaps = []
        for a, b in itertools.combinations(self.spec.batch_sizes, 2):
            qa = summarize(self._finals(a, "qd_score"))
            qb = summarize(self._finals(b, "qd_score"))
            overlap = None
            if qa["q1"] is not None and qb["q1"] is not None:
                overlap = qa["q1"] <= qb["q3"] and qb["q1"] <= qa["q3"]
            overlaps.append({"batch_size_a": a, "batch_size_b": b, "overlap": overlap})

        corrected = [c["p_corrected"] for c in comparisons]
        significant = [c for c in comparisons if c["p_corrected"] is not None and c["p_corrected"] <= alpha]
        smallest, largest = min(self.spec.batch_sizes), max(self.spec.batch_sizes)
        it_small, it_large = self._iterations(smallest), self._iterations(largest)
        ratio = it_large / it_small if it_small and it_large is not None else None

        monotone = all(
            all(b.qd_score >= a.qd_score and b.coverage >= a.coverage for a, b in zip(r.records, r.records[1:]))
            for r in self.runs
            if r.ok
        )
        return {
            "alpha": alpha,
            "iqr_overlap": overlaps,
            "min_p_corrected": min((p for p in corrected if p is not None), default=None),
            "significant_pairs": [[c["batch_size_a"], c["batch_size_b"]] for c in significant],
            "batch_size_invariant": bool(corrected)
            and all(p is not None and p > alpha for p in corrected)
            and all(o["overlap"] for o in overlaps),
            "iteration_ratio": ratio,
            "monotone": monotone,
        }

    def summary(self) -> dict:
        per_batch = {}
        for b in self.spec.batch_sizes:
            done = [r for r in self.runs if r.ok and r.batch_size == b]
            per_batch[str(b)] = {
                "runs": len(done),
                "iterations": done[0].iterations if done else None,
                "total_evaluations": done[0].total_evaluations if done else None,
                "qd_score": summarize(self._finals(b, "qd_score")),
                "coverage": summarize(self._finals(b, "coverage")),
                "best_objective": summarize(self._finals(b, "best_objective")),
            }
        comparisons, factor = self.comparisons()
        return {
            "spec": self.spec.to_dict(),
            "per_batch_size": per_batch,
            "comparisons": comparisons,
            "bonferroni_factor": factor,
            "acceptance": self.acceptance(comparisons),
            "failed_runs": [
                {"batch_size": r.batch_size, "replication": r.replication, "seed": r.seed, "error": r.error}
                for r in self.failed
            ],
        }

    def timings(self) -> dict:
        per_batch = {}
        for b in self.spec.batch_sizes:
            done = [r for r in self.runs if r.ok and r.batch_size == b]
            per_batch[str(b)] = {
                "runtime": summarize([r.total_wall_clock for r in done]),
                "runs": {str(r.replication): r.total_wall_clock for r in done},
            }
        return {"per_batch_size": per_batch}

    def summary_dataset(self) -> tablib.Dataset:
        data = tablib.Dataset(
            headers=[
                "batch_size",
                "runs",
                "iterations",
                "qd_score_median",
                "qd_score_q1",
                "qd_score_q3",
                "qd_score_iqr",
                "coverage_median",
                "best_objective_median",
            ]
        )
        for b, row in self.summary()["per_batch_size"].items():
            qd = row["qd_score"]
            data.append(
                [
                    int(b),
                    row["runs"],
                    row["iterations"],
                    qd["median"],
                    qd["q1"],
                    qd["q3"],
                    qd["iqr"],
                    row["coverage"]["median"],
                    row["best_objective"]["median"],
                ]
            )
        return data


def run_ablation(spec: AblationSpec, out_dir: Path, genotype_format: str = "npz", xlsx: bool = False) -> SweepReport:
    """顺序执行全部运行；单次失败记入报告，实验继续。"""

    out = prepare_output_dir(out_dir)
    runs: list[SweepRun] = []
    for batch_size, replication in itertools.product(spec.batch_sizes, range(spec.replications)):
        config_error = None
        try:
            config = spec.run_config(batch_size, replication)
        except ConfigError as exc:
            config_error = exc
        run = SweepRun(batch_size, replication, spec.base_seed + replication)
        if config_error is not None:
            run.error = format_error(config_error)
        else:
            try:
                result = run_single(config, out / f"b{batch_size}_r{replication}", genotype_format)
            except (QDError, MemoryError, OSError) as exc:
                run.error = format_error(exc)
            else:
                run.records = result.records
                run.iterations = result.iterations
                run.total_evaluations = result.total_evaluations
                run.total_wall_clock = result.total_wall_clock
        if run.ok:
            logger.info(
                "消融运行完成",
                extra={"batch_size": batch_size, "replication": replication, "qd_score": run.final.qd_score},
            )
        else:
            logger.error(
                "消融运行失败", extra={"batch_size": batch_size, "replication": replication, "error": run.error}
            )
        runs.append(run)

    report = SweepReport(spec=spec, runs=runs)
    rows = report.rows()
    export_csv(SweepMetricsResource, rows, out / "sweep_metrics.csv")
    export_csv(SweepTimingsResource, rows, out / "sweep_timings.csv")
    write_json(out / "summary.json", report.summary())
    write_json(out / "timings.json", report.timings())
    if xlsx:
        write_bytes(out / "summary.xlsx", report.summary_dataset().export("xlsx"))
    return report


# =============================================================================
# 吞吐量实验
# =============================================================================

THROUGHPUT_MODES = ("iterations", "budget")


@dataclass
class ThroughputPoint:
    batch_size: int
    workers: int
    iterations: int = 0
    evaluations: int = 0
    evals_per_second: float | None = None
    evals_per_second_steady: float | None = None
    runtime_seconds: float | None = None
    status: str = "ok"
    error: str | None = None


def _root_cause(exc: BaseException) -> BaseException:
    return exc.cause if isinstance(exc, IterationError) else exc


def measure_throughput(config: RunConfig, mode: str) -> ThroughputPoint:
    point = ThroughputPoint(batch_size=config.batch_size, workers=config.workers)
    try:
        result = MapElites(config).run()
    except (QDError, MemoryError) as exc:
        cause = _root_cause(exc)
        point.status = "oom" if isinstance(cause, MemoryError) else "failed"
        point.error = format_error(exc)
        return point

    timed = result.records[1:]
    point.iterations = result.iterations
    if mode == "iterations":
        point.evaluations = sum(r.batch_size for r in timed)
        point.runtime_seconds = sum(r.iteration_wall_clock for r in timed)
    else:
        point.evaluations = result.total_evaluations
        point.runtime_seconds = result.total_wall_clock
    point.evals_per_second = _post_init_rate(result.records)
    # 去掉第一次计时迭代（预热）后的稳定值
    point.evals_per_second_steady = _post_init_rate(result.records, skip=2) or point.evals_per_second
    return point


def run_throughput(
    base: RunConfig,
    batch_sizes: list[int],
    out_dir: Path,
    mode: str = "iterations",
    iterations: int = 100,
) -> list[ThroughputPoint]:
    """
    对每个批大小测量 eval/s。

    mode:
        iterations: 每个批大小执行固定次数迭代（初始化批次等于批大小，不计入）
        budget: 每个批大小使用相同评估预算，记录总运行时间
    """

    if mode not in THROUGHPUT_MODES:
        raise ConfigError(f"未知吞吐量模式：{mode}（可选 {', '.join(THROUGHPUT_MODES)}）")
    out = prepare_output_dir(out_dir)
    points = []
    for batch_size in batch_sizes:
        try:
            if mode == "iterations":
                config = dataclasses.replace(
                    base, batch_size=batch_size, init_batch_size=batch_size, iterations=iterations
                )
            else:
                config = dataclasses.replace(base, batch_size=batch_size, init_batch_size=None, iterations=None)
        except ConfigError as exc:
            point = ThroughputPoint(batch_size, base.workers, status="failed", error=format_error(exc))
        else:
            point = measure_throughput(config, mode)
        logger.info(
            "吞吐量测量完成",
            extra={"batch_size": batch_size, "status": point.status, "evals_per_second": point.evals_per_second},
        )
        points.append(point)

    export_csv(ThroughputResource, points, out / "throughput.csv")
    return points
