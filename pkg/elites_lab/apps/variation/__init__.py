"""父代选择与 Iso+LineDD 变异。"""

from .operators import IsoLineParams, apply_iso_line, iso_line, random_genotypes, select_parents
from .rng import RNG_ALGORITHM, RngState, Stream

__all__ = [
    "IsoLineParams",
    "RNG_ALGORITHM",
    "RngState",
    "Stream",
    "apply_iso_line",
    "iso_line",
    "random_genotypes",
    "select_parents",
]
