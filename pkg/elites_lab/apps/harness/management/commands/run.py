"""qd run：单次 MAP-Elites 运行。"""

from apps.harness.management.base import ExperimentCommand
from apps.harness.runner import run_single
from apps.mapelites import RunConfig


class Command(ExperimentCommand):
    help = "执行一次 MAP-Elites 运行，写出 metrics.csv / timings.csv / archive.csv / meta.json"

    flags = (
        "task",
        "grid_shape",
        "batch_size",
        "budget",
        "init_batch_size",
        "init_retries",
        "seed",
        "workers",
        "sigma1",
        "sigma2",
        "num_params",
        "hidden_size",
        "episode_len",
        "death_policy",
        "genotype_format",
    )
    required = ("task",)
    output_name = "run"

    def run_experiment(self, params, out):
        config = RunConfig(
            task=params["task"],
            task_options=self.task_options(params),
            grid_shape=params.get("grid_shape"),
            batch_size=params["batch_size"],
            budget=params["budget"],
            init_batch_size=params.get("init_batch_size"),
            init_retries=params["init_retries"],
            sigma1=params["sigma1"],
            sigma2=params["sigma2"],
            seed=params["seed"],
            workers=params["workers"],
        )
        result = run_single(config, out, params["genotype_format"])
        final = result.final
        self.stdout.write(
            f"完成 {result.iterations} 次迭代，共 {result.total_evaluations} 次评估；"
            f"QD-score={final.qd_score:.6g} 覆盖={final.coverage}（{final.coverage_fraction:.2%}）"
            f" 最佳={final.best_objective}"
        )
        self.stdout.write(f"输出目录：{out}")
