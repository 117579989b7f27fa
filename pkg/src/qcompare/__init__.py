"""Probability-based comparison of quantum states."""

__version__ = "0.1.0"

from .comparison import (
    TAU,
    DistanceResult,
    distance,
    distance_two_outcome,
    swap_distance,
    twin_range,
)
from .comparators import COMPARATOR_IDS, Comparator, get_comparator
from .effects import Effect, Povm
from .sampling import MeasureKind, SeededStream
from .states import BlochVector, DensityMatrix

__all__ = [
    "TAU",
    "BlochVector",
    "Comparator",
    "COMPARATOR_IDS",
    "DensityMatrix",
    "DistanceResult",
    "Effect",
    "MeasureKind",
    "Povm",
    "SeededStream",
    "distance",
    "distance_two_outcome",
    "get_comparator",
    "swap_distance",
    "twin_range",
]
