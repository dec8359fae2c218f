"""qd ablate：批大小消融实验。"""

from django.core.management.base import CommandError

from apps.harness.management.base import ExperimentCommand
from apps.harness.runner import AblationSpec, run_ablation

PARTIAL_FAILURE_EXIT_CODE = 3


class Command(ExperimentCommand):
    help = "在固定评估预算下对多个批大小各重复运行，输出长表 CSV 与秩和检验汇总"

    flags = (
        "task",
        "grid_shape",
        "batch_sizes",
        "budget",
        "init_batch_size",
        "init_retries",
        "replications",
        "seed",
        "workers",
        "sigma1",
        "sigma2",
        "num_params",
        "hidden_size",
        "episode_len",
        "death_policy",
        "genotype_format",
        "xlsx",
    )
    required = ("task",)
    output_name = "ablate"

    def run_experiment(self, params, out):
        spec = AblationSpec(
            task=params["task"],
            task_options=self.task_options(params),
            grid_shape=params.get("grid_shape"),
            batch_sizes=tuple(params["batch_sizes"]),
            budget=params["budget"],
            init_batch_size=params.get("init_batch_size"),
            init_retries=params["init_retries"],
            replications=params["replications"],
            base_seed=params["seed"],
            workers=params["workers"],
            sigma1=params["sigma1"],
            sigma2=params["sigma2"],
        )
        report = run_ablation(spec, out, params["genotype_format"], xlsx=params["xlsx"])

        summary = report.summary()
        for batch_size, row in summary["per_batch_size"].items():
            qd = row["qd_score"]
            self.stdout.write(
                f"N_B={batch_size}: {row['runs']} 次运行，{row['iterations']} 次迭代，"
                f"QD-score 中位数={qd['median']} IQR={qd['iqr']}"
            )
        for comparison in summary["comparisons"]:
            self.stdout.write(
                f"{comparison['batch_size_a']} vs {comparison['batch_size_b']}: "
                f"p={comparison['p_value']} 校正后 p={comparison['p_corrected']}"
            )
        acceptance = summary["acceptance"]
        self.stdout.write(
            f"批大小不变性：{acceptance['batch_size_invariant']}，"
            f"迭代次数比={acceptance['iteration_ratio']}，轨迹单调：{acceptance['monotone']}"
        )

        failed = report.failed
        if failed:
            raise CommandError(
                f"{len(failed)}/{len(report.runs)} 次运行失败，详见 {out / 'summary.json'}",
                returncode=PARTIAL_FAILURE_EXIT_CODE,
            )
