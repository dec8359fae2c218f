"""qd throughput：吞吐量实验（eval/s 随批大小的变化）。"""

from django.conf import settings

from apps.harness.management.base import ExperimentCommand
from apps.harness.runner import run_throughput
from apps.mapelites import RunConfig


class Command(ExperimentCommand):
    help = "对批大小阶梯测量每秒评估次数，写出 throughput.csv"

    flags = (
        "task",
        "grid_shape",
        "batch_sizes",
        "budget",
        "iterations",
        "init_retries",
        "mode",
        "seed",
        "workers",
        "sigma1",
        "sigma2",
        "num_params",
        "hidden_size",
        "episode_len",
        "death_policy",
    )
    required = ("task",)
    output_name = "throughput"

    @property
    def command_defaults(self):
        return {"batch_sizes": settings.QD_SETTINGS["THROUGHPUT_BATCH_SIZES"]}

    def run_experiment(self, params, out):
        base = RunConfig(
            task=params["task"],
            task_options=self.task_options(params),
            grid_shape=params.get("grid_shape"),
            batch_size=params["batch_sizes"][0],
            budget=params["budget"],
            sigma1=params["sigma1"],
            sigma2=params["sigma2"],
            seed=params["seed"],
            workers=params["workers"],
            init_retries=params["init_retries"],
            iterations=params["iterations"] if params["mode"] == "iterations" else None,
        )
        points = run_throughput(base, params["batch_sizes"], out, mode=params["mode"], iterations=params["iterations"])
        for point in points:
            rate = f"{point.evals_per_second:.1f}" if point.evals_per_second else "-"
            self.stdout.write(f"N_B={point.batch_size}: {rate} eval/s [{point.status}]")
        self.stdout.write(f"输出：{out / 'throughput.csv'}")
