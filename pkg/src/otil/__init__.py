"""Imitation learning from several diverse experts with sliced optimal-transport pseudo-rewards."""

from .ot_core import (
    BarycentricWeights,
    DiscreteMeasure,
    ProjectionSet,
    SortedAlignment,
    build_alignment,
    mw_squared_1d,
    project_and_sort,
    sample_projections,
    sliced_mw_squared,
    sliced_w2_squared,
    w2_squared_1d,
)
from .reward_engine import (
    CombineStrategy,
    Mode,
    RewardConfig,
    RewardedEpisode,
    Transform,
    combine_concat_sample,
    relabel_episode,
    scotil_costs,
    smmotil_costs,
    transform_costs,
)
from .trajectory import ExpertSet, Trajectory, evenly_resample

__version__ = "0.1.0"
