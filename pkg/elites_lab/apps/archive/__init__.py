"""定容网格档案：网格划分、批量加入、快照导出。"""

from .grid_archive import AddOutcome, Candidate, GridArchive, batched_add, filled_indices
from .tessellation import GridTessellation, cell_index

__all__ = [
    "AddOutcome",
    "Candidate",
    "GridArchive",
    "GridTessellation",
    "batched_add",
    "cell_index",
    "filled_indices",
]
