"""
实验命令公共基类

参数优先级：QD_SETTINGS 默认值 < --config JSON 文件 < 命令行参数。
所有命令行参数默认为 None，未显式给出时才回落到配置文件与默认值。
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from utils.exceptions import QDError, format_error
from utils.file_utils import output_lock, prepare_output_dir
from utils.validators import GENOTYPE_FORMATS, parse_bool, parse_grid_shape, parse_int_list

logger = logging.getLogger(__name__)


FLAGS = {
    "task": {"help": "任务名称：rastrigin / sphere / point_nav"},
    "grid_shape": {"help": "网格形状，如 100x100 或 100,100（默认取任务自带形状）"},
    "batch_size": {"type": int, "help": "每次迭代的批大小 N_B"},
    "batch_sizes": {"help": "批大小列表，逗号分隔"},
    "budget": {"type": int, "help": "评估预算 H"},
    "init_batch_size": {"type": int, "help": "初始化批大小（默认等于批大小；消融实验默认取最大批大小）"},
    "init_retries": {"type": int, "help": "初始化全部死亡时的最大重试次数"},
    "replications": {"type": int, "help": "每个批大小的重复次数"},
    "seed": {"type": int, "help": "随机种子（消融实验为基础种子）"},
    "workers": {"type": int, "help": "并行评估进程数（默认取 QD_WORKERS 或 CPU 核数）"},
    "sigma1": {"type": float, "help": "各向同性噪声标准差"},
    "sigma2": {"type": float, "help": "沿父代连线噪声标准差"},
    "num_params": {"type": int, "help": "基准函数参数维度 N"},
    "hidden_size": {"type": int, "help": "点导航策略隐藏层宽度"},
    "episode_len": {"type": int, "help": "点导航回合长度 T"},
    "death_policy": {"choices": ["prefix", "discard"], "help": "点导航失败处理方式"},
    "iterations": {"type": int, "help": "吞吐量实验每个批大小的迭代次数"},
    "mode": {"choices": ["iterations", "budget"], "help": "吞吐量实验模式"},
    "genotype_format": {"choices": list(GENOTYPE_FORMATS), "help": "基因型导出格式"},
    "xlsx": {"action": "store_true", "help": "额外导出 summary.xlsx"},
    "cell_pixels": {"type": int, "help": "热力图每个单元的像素边长"},
    "archive": {"help": "archive.csv 路径"},
    "out": {"help": "输出目录"},
    "config": {"help": "JSON 配置文件（键为长参数名，使用下划线）"},
}

TASK_OPTIONS = ("num_params", "hidden_size", "episode_len", "death_policy")


def _defaults() -> dict:
    qd = settings.QD_SETTINGS
    return {
        "batch_size": qd["BATCH_SIZE"],
        "batch_sizes": qd["ABLATION_BATCH_SIZES"],
        "budget": qd["BUDGET"],
        "replications": qd["REPLICATIONS"],
        "init_retries": qd["INIT_RETRIES"],
        "seed": 0,
        "workers": qd["WORKERS"],
        "sigma1": qd["SIGMA1"],
        "sigma2": qd["SIGMA2"],
        "iterations": qd["THROUGHPUT_ITERATIONS"],
        "mode": "iterations",
        "genotype_format": qd["GENOTYPE_FORMAT"],
        "xlsx": False,
        "cell_pixels": qd["HEATMAP_CELL_PIXELS"],
    }


class ExperimentCommand(BaseCommand):
    """声明参数集合并合并默认值 / 配置文件 / 命令行参数。"""

    flags: tuple[str, ...] = ()
    required: tuple[str, ...] = ()
    command_defaults: dict = {}
    output_name = "run"

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        self._parser = parser
        return parser

    def add_arguments(self, parser):
        for name in (*self.flags, "out", "config"):
            parser.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, **FLAGS[name])

    # -------------------------------------------------------------------------

    def load_config_file(self, path: str) -> dict:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise CommandError(f"配置文件不存在：{path}") from None
        except json.JSONDecodeError as exc:
            raise CommandError(f"配置文件不是合法 JSON：{path}（{exc.msg}）") from None
        if not isinstance(payload, dict):
            raise CommandError("配置文件顶层必须是 JSON 对象")
        unknown = sorted(set(payload) - set(self.flags) - {"out"})
        if unknown:
            raise CommandError(f"配置文件包含未知参数：{', '.join(unknown)}")
        return payload

    def resolve_options(self, options: dict) -> dict:
        params = {k: v for k, v in _defaults().items() if k in self.flags}
        params.update(self.command_defaults)
        if options.get("config"):
            params.update(self.load_config_file(options["config"]))
        params.update({k: options[k] for k in (*self.flags, "out") if options.get(k) is not None})

        missing = [name for name in self.required if not params.get(name)]
        if missing:
            self._parser.error(
                "the following arguments are required: " + ", ".join(f"--{m.replace('_', '-')}" for m in missing)
            )
        try:
            return self.normalize(params)
        except (TypeError, ValueError) as exc:
            raise CommandError(format_error(exc)) from exc

    def normalize(self, params: dict) -> dict:
        if params.get("grid_shape") is not None:
            params["grid_shape"] = parse_grid_shape(params["grid_shape"])
        if "batch_sizes" in params:
            params["batch_sizes"] = parse_int_list(params["batch_sizes"])
        if "xlsx" in params:
            params["xlsx"] = parse_bool(params["xlsx"])
        if not params.get("out"):
            params["out"] = str(Path(settings.QD_SETTINGS["OUTPUT_DIR"]) / self.output_name)
        return params

    def task_options(self, params: dict) -> dict:
        return {k: params[k] for k in TASK_OPTIONS if params.get(k) is not None}

    # -------------------------------------------------------------------------

    def handle(self, *args, **options):
        params = self.resolve_options(options)
        try:
            out = prepare_output_dir(params["out"])
            with output_lock(out):
                self.run_experiment(params, out)
        except QDError as exc:
            logger.error("实验失败", extra={"command": self.output_name, "error": format_error(exc)})
            raise CommandError(format_error(exc)) from exc

    def run_experiment(self, params: dict, out: Path) -> None:
        raise NotImplementedError
