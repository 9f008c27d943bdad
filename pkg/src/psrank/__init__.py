"""Rank probabilities for uncertain vector objects in one distance-ordered pass."""

from ._backend import NAME as BACKEND
from .baselines import EnumerationLimitExceeded, max_abs_diff, possible_worlds_rank, ylks_rank
from .browsing import BrowsingStream, RankedInstance, build_browsing
from .dataset import (
    DimensionMismatch,
    QueryPoint,
    UncertainDatabase,
    UncertainObject,
    VectorInstance,
    distance,
    validate_database,
)
from .datagen import GenParams, generate
from .dp import DegenerateDivisor, adjust_probs, dynamic_round, full_dp_recompute
from .engine import (
    ActiveObjectList,
    InstanceRankMatrix,
    ObjectRankDistribution,
    PassStats,
    RankResult,
    psr_rank,
)
from .semantics import RankTable, SemanticsResult, expected_rank, global_top_k, pt_k, u_k_ranks

__version__ = "0.1.0"
