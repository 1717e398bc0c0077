"""
Optimal-transport pseudo-rewards for imitation from several experts.

Two ways of combining P expert trajectories are provided:

* SCOTIL: pool all expert states, sub-sample a single expert trajectory and
  score the agent against it with the sliced 2-Wasserstein distance.
* SMMOTIL: treat the agent as one more marginal next to the P experts and
  score it with the sliced multi-marginal (barycentric) distance.

In both cases the per-step costs are attributed through the sorted alignment
and sum exactly to the corresponding sliced distance. Costs are then mapped
to rewards by a decreasing transform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ot_core import (
    BarycentricWeights,
    DiscreteMeasure,
    ProjectionSet,
    build_alignment,
    sample_projections,
    sliced_mw_squared,
    sliced_w2_squared,
)
from .trajectory import ExpertSet, Trajectory, evenly_resample

__all__ = [
    "CombineStrategy",
    "ExpertSet",
    "Mode",
    "Relabeler",
    "RewardConfig",
    "RewardedEpisode",
    "Transform",
    "combine_concat_sample",
    "derive_seed",
    "relabel_episode",
    "scotil_costs",
    "smmotil_costs",
    "transform_costs",
]

SUM_IDENTITY_TOL = 1e-9


class Mode(str, enum.Enum):
    SCOTIL = "scotil"
    SMMOTIL = "smmotil"


class CombineStrategy(str, enum.Enum):
    STRATIFIED = "stratified"
    UNIFORM_POOL = "uniform_pool"


class Transform(str, enum.Enum):
    NEGATE = "negate"
    EXP = "exp"


@dataclass(frozen=True)
class RewardConfig:
    """How pseudo-rewards are computed.

    ``weights`` applies to SMMOTIL only and covers P + 1 marginals, the agent
    first; ``None`` means uniform. ``squared=False`` switches the per-step
    term to the unsquared absolute projection gap, for which the sum identity
    no longer holds.
    """

    mode: Mode = Mode.SMMOTIL
    projection_count: int = 50
    projection_seed: int = 0
    fresh_projections: bool = True
    combine_strategy: CombineStrategy = CombineStrategy.STRATIFIED
    combine_seed: int = 0
    combine_per_episode: bool = False
    weights: BarycentricWeights | None = None
    transform: Transform = Transform.NEGATE
    beta: float = 5.0
    squared: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "combine_strategy", CombineStrategy(self.combine_strategy))
        object.__setattr__(self, "transform", Transform(self.transform))
        if self.projection_count < 1:
            raise ValueError("projection_count must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.weights is not None and not isinstance(self.weights, BarycentricWeights):
            object.__setattr__(self, "weights", BarycentricWeights(self.weights))


@dataclass(frozen=True, eq=False)
class RewardedEpisode:
    states: np.ndarray
    actions: np.ndarray | None
    costs: np.ndarray
    rewards: np.ndarray
    total_cost: float

    def __eq__(self, other):
        if not isinstance(other, RewardedEpisode):
            return NotImplemented
        return (
            np.array_equal(self.states, other.states)
            and np.array_equal(self.costs, other.costs)
            and np.array_equal(self.rewards, other.rewards)
            and self.total_cost == other.total_cost
            and (
                (self.actions is None and other.actions is None)
                or (
                    self.actions is not None
                    and other.actions is not None
                    and np.array_equal(self.actions, other.actions)
                )
            )
        )


def derive_seed(*parts: int) -> int:
    """Mix integers into one 63-bit seed."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def combine_concat_sample(experts: ExpertSet, horizon: int, strategy=CombineStrategy.STRATIFIED, seed: int = 0) -> Trajectory:
    """Pool the states of all experts and sub-sample one trajectory of ``horizon`` states.

    STRATIFIED draws, for every time slot, the state of a uniformly chosen
    expert at that slot (experts are first evenly resampled to ``horizon``).
    UNIFORM_POOL draws ``horizon`` states without replacement from the whole
    pool and orders them by time index, then by expert index.
    """
    if not isinstance(experts, ExpertSet):
        experts = ExpertSet(tuple(experts))
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    strategy = CombineStrategy(strategy)
    rng = np.random.default_rng(seed)
    with_actions = all(tr.actions is not None for tr in experts)

    if strategy is CombineStrategy.STRATIFIED:
        aligned = [tr if len(tr) == horizon else evenly_resample(tr, horizon) for tr in experts]
        pick = rng.integers(len(aligned), size=horizon)
        slots = np.arange(horizon)
        states = np.stack([tr.states for tr in aligned])[pick, slots]
        actions = np.stack([tr.actions for tr in aligned])[pick, slots] if with_actions else None
    else:
        owner = np.concatenate([np.full(len(tr), p) for p, tr in enumerate(experts)])
        step = np.concatenate([np.arange(len(tr)) for tr in experts])
        if horizon > owner.size:
            raise ValueError(f"cannot draw {horizon} states without replacement from a pool of {owner.size}")
        chosen = rng.choice(owner.size, size=horizon, replace=False)
        chosen = chosen[np.lexsort((owner[chosen], step[chosen]))]
        all_states = np.concatenate([tr.states for tr in experts])
        states = all_states[chosen]
        actions = np.concatenate([tr.actions for tr in experts])[chosen] if with_actions else None

    first = experts[0]
    return Trajectory(states=states, actions=actions, env_name=first.env_name, env_params={}, seed=seed)


def _projected(measure: DiscreteMeasure, projections: ProjectionSet) -> np.ndarray:
    return measure.atoms @ projections.directions.T  # (T, K)


def scotil_costs(agent, combined_expert, projections: ProjectionSet, squared: bool = True) -> np.ndarray:
    """Per-step costs of the agent against a single (combined) expert.

    c_t = 1/(K T) sum_k |<s_t - e_{eta(k,t)}, theta_k>|^2 where eta(k,t) is
    the expert atom holding the agent atom's rank under theta_k.
    """
    agent = agent if isinstance(agent, DiscreteMeasure) else DiscreteMeasure(agent)
    expert = combined_expert if isinstance(combined_expert, DiscreteMeasure) else DiscreteMeasure(combined_expert)
    align = build_alignment([agent, expert], projections)
    K, T = projections.count, agent.size
    a = _projected(agent, projections)
    e = _projected(expert, projections)
    k_idx = np.arange(K)
    eta = align.order[k_idx[:, None], 1, align.ranks[:, 0, :]]  # (K, T)
    gap = a - e[eta.T, k_idx]
    term = gap**2 if squared else np.abs(gap)
    return term.sum(axis=1) / (K * T)


def smmotil_costs(agent, experts: Sequence, weights: BarycentricWeights, projections: ProjectionSet, squared: bool = True) -> np.ndarray:
    """Per-step costs of the agent as marginal 0 of a (P+1)-marginal barycentric problem.

    The whole rank-r multi-marginal cost under theta_k is attributed to the
    agent atom that holds rank r.
    """
    agent = agent if isinstance(agent, DiscreteMeasure) else DiscreteMeasure(agent)
    experts = [m if isinstance(m, DiscreteMeasure) else DiscreteMeasure(m) for m in experts]
    if not experts:
        raise ValueError("at least one expert is required")
    marginals = [agent, *experts]
    if len(weights) != len(marginals):
        raise ValueError(f"{len(weights)} weights for {len(marginals)} marginals (agent + {len(experts)} experts)")
    align = build_alignment(marginals, projections)
    K, T = projections.count, agent.size
    proj = np.stack([_projected(m, projections) for m in marginals])  # (P+1, T, K)
    k_idx = np.arange(K)
    # sorted[k, j, r] = value of marginal j at rank r under theta_k
    srt = proj[np.arange(len(marginals))[None, :, None], align.order, k_idx[:, None, None]]
    lam = weights.values
    bary = np.einsum("j,kjr->kr", lam, srt)
    gap = srt - bary[:, None, :]
    term = gap**2 if squared else np.abs(gap)
    per_rank = np.einsum("j,kjr->kr", lam, term)  # (K, T)
    attributed = per_rank[k_idx[:, None], align.ranks[:, 0, :]]  # (K, T) by agent time index
    return attributed.sum(axis=0) / (K * T)


def transform_costs(costs, config: RewardConfig) -> np.ndarray:
    """Map nonnegative costs to rewards; strictly decreasing in the cost."""
    c = np.asarray(costs, dtype=np.float64)
    if config.transform is Transform.NEGATE:
        return -c
    return np.exp(-config.beta * c * c.size)


def _weights_for(config: RewardConfig, n_marginals: int) -> BarycentricWeights:
    if config.weights is None:
        return BarycentricWeights.uniform(n_marginals)
    if len(config.weights) != n_marginals:
        raise ValueError(f"{len(config.weights)} weights configured for {n_marginals} marginals")
    return config.weights


def _projections_for(config: RewardConfig, dim: int, episode_seed: int) -> ProjectionSet:
    seed = derive_seed(config.projection_seed, episode_seed) if config.fresh_projections else config.projection_seed
    return sample_projections(dim, config.projection_count, seed)


def _combined_for(experts: ExpertSet, config: RewardConfig, episode_seed: int) -> Trajectory:
    seed = derive_seed(config.combine_seed, episode_seed) if config.combine_per_episode else config.combine_seed
    return combine_concat_sample(experts, experts.nominal_horizon, config.combine_strategy, seed)


def relabel_episode(agent_states, experts: ExpertSet, config: RewardConfig, episode_seed: int, actions=None, combined: Trajectory | None = None) -> RewardedEpisode:
    """Score one finished agent episode against the experts.

    Experts (or the combined SCOTIL expert) are evenly resampled to the
    episode length L; projections are drawn from ``config.projection_seed``
    and ``episode_seed``. ``combined`` lets a caller reuse a combined expert
    across episodes.
    """
    states = np.asarray(agent_states, dtype=np.float64)
    if states.ndim == 1:
        states = states[:, None]
    L = states.shape[0]
    if L < 1:
        raise ValueError("agent episode must contain at least one state")
    if states.shape[1] != experts.dim:
        raise ValueError(f"agent state dimension {states.shape[1]} != expert dimension {experts.dim}")
    agent = DiscreteMeasure(states)
    projections = _projections_for(config, agent.dim, episode_seed)

    if config.mode is Mode.SCOTIL:
        if combined is None:
            combined = _combined_for(experts, config, episode_seed)
        expert = DiscreteMeasure(evenly_resample(combined, L).states)
        costs = scotil_costs(agent, expert, projections, squared=config.squared)
        reference = sliced_w2_squared(agent, expert, projections) if config.squared else None
    else:
        measures = [DiscreteMeasure(evenly_resample(tr, L).states) for tr in experts]
        weights = _weights_for(config, len(measures) + 1)
        costs = smmotil_costs(agent, measures, weights, projections, squared=config.squared)
        reference = sliced_mw_squared([agent, *measures], weights, projections) if config.squared else None

    total = math.fsum(costs)
    if reference is not None and abs(total - reference) > SUM_IDENTITY_TOL * max(1.0, abs(reference)):
        raise RuntimeError(f"reward-sum identity violated: sum of costs {total!r} != sliced distance {reference!r}")
    rewards = transform_costs(costs, config)
    acts = None if actions is None else np.asarray(actions, dtype=np.int64)
    return RewardedEpisode(states=states, actions=acts, costs=costs, rewards=rewards, total_cost=total)


class Relabeler:
    """Episode relabeling bound to one expert set, caching the combined SCOTIL expert."""

    def __init__(self, experts: ExpertSet, config: RewardConfig):
        self.experts = experts
        self.config = config
        self._combined = None
        if config.mode is Mode.SCOTIL and not config.combine_per_episode:
            self._combined = _combined_for(experts, config, 0)

    def __call__(self, agent_states, episode_seed: int, actions=None) -> RewardedEpisode:
        return relabel_episode(agent_states, self.experts, self.config, episode_seed, actions=actions, combined=self._combined)
