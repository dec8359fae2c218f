"""qd heatmap：把 archive.csv 导出为灰度热力图。"""

from pathlib import Path

from apps.harness.heatmap import export_heatmap
from apps.harness.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = "读取 archive.csv + archive.json，写出 heatmap.pgm 与 heatmap.json 图例"

    flags = ("archive", "cell_pixels")
    output_name = "heatmap"

    def run_experiment(self, params, out):
        archive = Path(params.get("archive") or out / "archive.csv")
        legend = export_heatmap(archive, out / "heatmap.pgm", cell_pixels=params["cell_pixels"])
        self.stdout.write(
            f"热力图：{out / 'heatmap.pgm'}（{legend['filled_cells']} 个非空单元，"
            f"适应度范围 {legend['min']} ~ {legend['max']}）"
        )
