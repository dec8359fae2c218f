from .benchmarks import BenchmarkTask, rastrigin, sphere
from .evaluation import Evaluation, EvaluationBatch, ScoringFunction, evaluate_batch
from .point_nav import PointNavConfig, PointNavTask, point_nav_episode, rollout_batch
from .policy import MlpPolicy, mlp_forward
from .registry import TASKS, build_task

__all__ = [
    "BenchmarkTask",
    "Evaluation",
    "EvaluationBatch",
    "MlpPolicy",
    "PointNavConfig",
    "PointNavTask",
    "ScoringFunction",
    "TASKS",
    "build_task",
    "evaluate_batch",
    "mlp_forward",
    "point_nav_episode",
    "rastrigin",
    "rollout_batch",
    "sphere",
]
