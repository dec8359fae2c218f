"""
MAP-Elites 主循环

流程：
1. 初始化：随机采样 init_batch_size 个基因型，评估后批量加入档案（记为第 0 次迭代）
2. 迭代 1..I：选择父代 → Iso+LineDD 变异 → 并行评估 → 批量加入 → 记录指标

随机流计数器：初始化第 k 次尝试使用 counter=k（INIT 流），第 i 次迭代使用
counter=i（SELECTION / VARIATION 流），结果只取决于 (配置, 种子)。
"""

from __future__ import annotations

import contextlib
import logging
import multiprocessing
import time

from apps.archive import GridArchive
from apps.metrics import MetricsRecord, snapshot
from apps.tasks import evaluate_batch
from apps.variation import IsoLineParams, RngState, iso_line, random_genotypes, select_parents
from utils.exceptions import InitializationError, IterationError

from .config import RunConfig, RunResult

logger = logging.getLogger(__name__)


class MapElites:
    """单次运行的执行器，持有档案、评估计数和指标轨迹。"""

    def __init__(self, config: RunConfig, scoring=None):
        self.config = config
        self.scoring = scoring or config.build_task()
        self.tessellation = config.build_tessellation(self.scoring)
        self.params = IsoLineParams(
            sigma1=config.sigma1,
            sigma2=config.sigma2,
            lower=self.scoring.genotype_lower,
            upper=self.scoring.genotype_upper,
        )
        self.offset = self.scoring.fitness_offset
        self.rng = RngState(config.seed)
        self.archive = GridArchive(self.tessellation, self.scoring.genotype_len)
        self.records: list[MetricsRecord] = []
        self.evaluations = 0
        self.init_attempts = 0
        self._pool = None

    @contextlib.contextmanager
    def evaluation_pool(self):
        """workers > 1 时整个运行共用一个进程池。"""

        if self.config.workers == 1:
            yield None
            return
        with multiprocessing.Pool(self.config.workers) as pool:
            self._pool = pool
            try:
                yield pool
            finally:
                self._pool = None

    def _evaluate(self, genotypes):
        return evaluate_batch(self.scoring, genotypes, workers=self.config.workers, pool=self._pool)

    def initialize(self) -> GridArchive:
        """随机初始化；全部候选死亡时换下一个计数器重试。"""

        cfg = self.config
        started = time.perf_counter()
        for attempt in range(cfg.init_retries):
            self.init_attempts = attempt + 1
            genotypes = random_genotypes(
                cfg.init_batch_size,
                self.scoring.genotype_lower,
                self.scoring.genotype_upper,
                self.scoring.genotype_len,
                self.rng.advance(attempt),
            )
            batch = self._evaluate(genotypes)
            self.evaluations += len(batch)
            self.archive.add_batch(genotypes, batch.fitness, batch.descriptors, batch.dead)
            if self.archive.filled_count > 0:
                break
            logger.warning("初始化批次全部死亡，重试", extra={"attempt": attempt + 1, "task": self.scoring.name})
        else:
            raise InitializationError(f"初始化重试 {cfg.init_retries} 次后仍没有可加入档案的候选解")

        record = snapshot(
            self.archive,
            self.offset,
            iteration=0,
            cumulative_evaluations=self.evaluations,
            batch_size=cfg.init_batch_size,
            wall_clock=time.perf_counter() - started,
            warmup=True,
        )
        self.records.append(record)
        logger.info(
            "初始化完成",
            extra={
                "task": self.scoring.name,
                "batch_size": cfg.init_batch_size,
                "coverage": record.coverage,
                "qd_score": record.qd_score,
                "attempts": self.init_attempts,
            },
        )
        return self.archive

    def step(self, iteration: int) -> MetricsRecord:
        """执行一次迭代并返回其指标记录。"""

        cfg = self.config
        started = time.perf_counter()
        rng = self.rng.advance(iteration)
        parents1, parents2 = select_parents(self.archive, cfg.batch_size, rng)
        offspring = iso_line(parents1, parents2, self.params, rng)
        batch = self._evaluate(offspring)
        self.evaluations += len(batch)
        self.archive.add_batch(offspring, batch.fitness, batch.descriptors, batch.dead)

        record = snapshot(
            self.archive,
            self.offset,
            iteration=iteration,
            cumulative_evaluations=self.evaluations,
            batch_size=cfg.batch_size,
            wall_clock=time.perf_counter() - started,
        )
        self.records.append(record)
        logger.debug(
            "迭代完成",
            extra={
                "iteration": iteration,
                "evaluations": record.cumulative_evaluations,
                "qd_score": record.qd_score,
                "coverage": record.coverage,
                "evals_per_second": record.evals_per_second,
            },
        )
        return record

    def run(self) -> RunResult:
        cfg = self.config
        started = time.perf_counter()
        with self.evaluation_pool():
            try:
                self.initialize()
            except InitializationError:
                raise
            except Exception as exc:
                raise IterationError(0, exc) from exc

            for iteration in range(1, cfg.iterations_planned + 1):
                try:
                    self.step(iteration)
                except Exception as exc:
                    raise IterationError(iteration, exc) from exc

        total = time.perf_counter() - started
        budget = cfg.budget if cfg.iterations is None else cfg.evaluations_planned
        result = RunResult(
            archive=self.archive,
            records=list(self.records),
            total_wall_clock=total,
            total_evaluations=self.evaluations,
            iterations=cfg.iterations_planned,
            overshoot=max(0, self.evaluations - budget),
            init_attempts=self.init_attempts,
        )
        final = result.final
        logger.info(
            "运行完成",
            extra={
                "task": self.scoring.name,
                "iterations": result.iterations,
                "evaluations": result.total_evaluations,
                "qd_score": final.qd_score,
                "coverage": final.coverage,
                "wall_clock": total,
            },
        )
        return result


def initialize(config: RunConfig, rng: RngState | None = None) -> GridArchive:
    """只执行初始化，返回初始档案。"""

    engine = MapElites(config)
    if rng is not None:
        engine.rng = rng
    with engine.evaluation_pool():
        return engine.initialize()


def run(config: RunConfig) -> RunResult:
    return MapElites(config).run()
