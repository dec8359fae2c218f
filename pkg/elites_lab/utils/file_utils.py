"""
文件处理工具

用于实验输出目录：目录准备、单实例锁文件、失败时清理半成品文件、JSON 写出。
"""

from __future__ import annotations

import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

from utils.exceptions import OutputLockedError

logger = logging.getLogger(__name__)


LOCK_FILENAME = ".qd.lock"


def prepare_output_dir(path: str | os.PathLike) -> Path:
    """创建输出目录（含父目录），返回 Path。"""

    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@contextmanager
def output_lock(out_dir: Path) -> Iterator[Path]:
    """
    输出目录单实例锁：O_EXCL 创建锁文件，退出时删除。

    已存在锁文件说明另一个进程正在写该目录，抛出 OutputLockedError。
    """

    lock_path = Path(out_dir) / LOCK_FILENAME
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockedError(f"输出目录 {out_dir} 正被另一个进程使用（{lock_path} 已存在）") from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
    finally:
        os.close(fd)
    try:
        yield lock_path
    finally:
        lock_path.unlink(missing_ok=True)


class PartialOutput:
    """
    记录本次运行写出的文件；运行失败时删除这些半成品。

    用法：
        with PartialOutput() as files:
            path = files.track(out / "metrics.csv")
            ...
    """

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def track(self, path: Path) -> Path:
        self.paths.append(Path(path))
        return Path(path)

    def discard(self) -> None:
        for path in reversed(self.paths):
            if path.is_file():
                path.unlink()
                logger.info("删除半成品文件", extra={"path": str(path)})
        self.paths.clear()

    def __enter__(self) -> "PartialOutput":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            self.discard()
        return False


def write_json(path: Path, payload: Any) -> Path:
    """写出 JSON：键排序、缩进 2、UTF-8，结尾换行（保证字节级可复现）。"""

    text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return Path(path)


def write_bytes(path: Path, data: bytes | str) -> Path:
    """写出文本/二进制内容（文本按 UTF-8 编码，不做换行转换）。"""

    if isinstance(data, str):
        data = data.encode("utf-8")
    Path(path).write_bytes(data)
    return Path(path)
