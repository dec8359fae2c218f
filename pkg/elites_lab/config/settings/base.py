"""
Django 基础配置
所有环境共享的配置项
"""

import os
from pathlib import Path

# 项目根目录 (elites_lab/)
BASE_DIR = Path(__file__).resolve().parents[2]


# =============================================================================
# 应用配置
# =============================================================================

INSTALLED_APPS = [
    # 项目应用（按依赖顺序：档案 → 变异 → 任务 → 主循环 → 指标 → 实验命令）
    "apps.archive.apps.ArchiveConfig",
    "apps.variation.apps.VariationConfig",
    "apps.tasks.apps.TasksConfig",
    "apps.mapelites.apps.MapelitesConfig",
    "apps.metrics.apps.MetricsConfig",
    "apps.harness.apps.HarnessConfig",
]

# 纯命令行工具，不使用数据库
DATABASES: dict = {}


# =============================================================================
# 国际化配置
# =============================================================================

LANGUAGE_CODE = "zh-hans"
TIME_ZONE = "Asia/Shanghai"
USE_I18N = True
USE_TZ = True


# =============================================================================
# 实验默认参数
# =============================================================================

QD_SETTINGS = {
    # 并行评估进程数（环境变量优先，否则取 CPU 核数）
    "WORKERS": int(os.environ.get("QD_WORKERS") or os.cpu_count() or 1),
    "OUTPUT_DIR": os.environ.get("QD_OUTPUT_DIR", str(BASE_DIR.parent / "runs")),
    # 评估预算与批大小
    "BUDGET": 102400,
    "BATCH_SIZE": 256,
    # 批大小消融实验
    "ABLATION_BATCH_SIZES": [64, 256, 1024, 4096],
    "REPLICATIONS": 5,
    # 吞吐量实验：从 64 开始逐次翻倍
    "THROUGHPUT_BATCH_SIZES": [64, 128, 256, 512, 1024, 2048, 4096],
    "THROUGHPUT_ITERATIONS": 100,
    # 初始化全部死亡时的重试次数
    "INIT_RETRIES": 10,
    # Iso+LineDD
    "SIGMA1": 0.01,
    "SIGMA2": 0.2,
    "GENOTYPE_FORMAT": "npz",
    "HEATMAP_CELL_PIXELS": 4,
}


# =============================================================================
# 日志配置
# =============================================================================

QD_LOG_LEVEL = os.environ.get("QD_LOG_LEVEL", "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {message}",
            "style": "{",
        },
        "json": {
            "()": "pythonjsonlogger.jsonlogger.JsonFormatter",
            "format": "%(levelname)s %(asctime)s %(name)s %(process)d %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": QD_LOG_LEVEL,
            "propagate": False,
        },
        "utils": {
            "handlers": ["console"],
            "level": QD_LOG_LEVEL,
            "propagate": False,
        },
    },
}
