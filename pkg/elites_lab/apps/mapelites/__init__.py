"""MAP-Elites 主循环：初始化、选择 → 变异 → 评估 → 加入。"""

from .config import RunConfig, RunResult
from .loop import MapElites, initialize, run

__all__ = ["MapElites", "RunConfig", "RunResult", "initialize", "run"]
