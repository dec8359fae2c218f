"""
领域异常定义

用于将算法各模块的错误统一为 QDError 体系：
- 配置错误、非法评估、基因长度不匹配、空档案选择等
- 命令行层通过 format_error() 输出一条可读信息
"""

from __future__ import annotations

from typing import Any


class QDError(Exception):
    """所有领域错误的基类。"""


class ConfigError(QDError, ValueError):
    """运行配置 / 网格划分 / 扫描配置非法。"""


class InvalidEvaluationError(QDError, ValueError):
    """评估结果非法（描述子或适应度非有限值）。"""


class GenotypeShapeError(QDError, ValueError):
    """基因型长度与档案或策略网络不一致。"""


class EmptyArchiveError(QDError, RuntimeError):
    """档案为空时无法选择父代。"""

    def __init__(self, message: str = "档案为空，无法选择父代：请先执行初始化（随机解批次）"):
        super().__init__(message)


class InitializationError(QDError):
    """初始化多次重试后仍没有任何候选解进入档案。"""


class UnsupportedDimensionsError(QDError, ValueError):
    """热力图仅支持 1-4 维描述子空间。"""


class OutputLockedError(QDError):
    """输出目录已被另一个进程占用。"""


class TaskEvaluationError(QDError):
    """
    评估函数执行失败。

    position 为失败基因型在整个批次中的下标；
    args 保持 (message, position)，以便跨进程 pickle。
    """

    def __init__(self, message: str, position: int):
        super().__init__(message, position)
        self.message = message
        self.position = position

    def __str__(self) -> str:
        return f"批次第 {self.position} 个候选解评估失败：{self.message}"


class IterationError(QDError):
    """主循环某次迭代中抛出的错误，附带迭代序号。"""

    def __init__(self, iteration: int, cause: BaseException):
        super().__init__(iteration, cause)
        self.iteration = iteration
        self.cause = cause

    def __str__(self) -> str:
        return f"第 {self.iteration} 次迭代失败：{format_error(self.cause)}"


def _extract_first_error_message(detail: Any) -> str:
    """从异常参数中提取第一条可读信息。"""

    if detail is None:
        return "未知错误"

    if isinstance(detail, str):
        return detail

    if isinstance(detail, (list, tuple)) and detail:
        return _extract_first_error_message(detail[0])

    if isinstance(detail, dict):
        for _, v in detail.items():
            return _extract_first_error_message(v)

    return str(detail)


def format_error(exc: BaseException) -> str:
    """
    将异常格式化为一行信息。

    注意：带上下文的异常（迭代序号、批次位置）使用自身的 __str__。
    """

    if isinstance(exc, (TaskEvaluationError, IterationError)):
        return str(exc)
    message = _extract_first_error_message(exc.args) if exc.args else ""
    return message or exc.__class__.__name__
