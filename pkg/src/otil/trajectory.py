"""Trajectory records and expert sets shared by the reward engine and the demo I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ot_core import DiscreteMeasure


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An ordered sequence of environment states with optional actions.

    ``actions`` has one entry per state: ``actions[t]`` is the action taken in
    ``states[t]``.
    """

    states: np.ndarray
    actions: np.ndarray | None = None
    env_name: str = ""
    env_params: dict = field(default_factory=dict)
    seed: int | None = None
    true_return: float = float("nan")

    def __post_init__(self):
        states = np.array(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1 or states.shape[1] < 1:
            raise ValueError(f"states must be a non-empty (L, d) array, got shape {states.shape}")
        if not np.all(np.isfinite(states)):
            raise ValueError("states must be finite")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.actions is not None:
            actions = np.array(self.actions, dtype=np.int64).ravel()
            if actions.size != states.shape[0]:
                raise ValueError(f"{actions.size} actions for {states.shape[0]} states")
            actions.setflags(write=False)
            object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "env_params", dict(self.env_params))

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.states)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        same_actions = (self.actions is None and other.actions is None) or (
            self.actions is not None
            and other.actions is not None
            and np.array_equal(self.actions, other.actions)
        )
        same_return = self.true_return == other.true_return or (
            np.isnan(self.true_return) and np.isnan(other.true_return)
        )
        return (
            np.array_equal(self.states, other.states)
            and same_actions
            and self.env_name == other.env_name
            and self.env_params == other.env_params
            and self.seed == other.seed
            and same_return
        )

    def replace(self, **changes) -> "Trajectory":
        kw = dict(
            states=self.states,
            actions=self.actions,
            env_name=self.env_name,
            env_params=self.env_params,
            seed=self.seed,
            true_return=self.true_return,
        )
        kw.update(changes)
        return Trajectory(**kw)


@dataclass(frozen=True)
class ExpertSet:
    """P expert trajectories sharing one state dimension."""

    trajectories: tuple[Trajectory, ...]
    nominal_horizon: int = 200

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ValueError("an expert set needs at least one trajectory")
        d = trajs[0].dim
        for tr in trajs:
            if tr.dim != d:
                raise ValueError(f"expert dimensions differ: {tr.dim} != {d}")
        if self.nominal_horizon < 1:
            raise ValueError("nominal_horizon must be >= 1")
        object.__setattr__(self, "trajectories", trajs)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]

    @property
    def dim(self) -> int:
        return self.trajectories[0].dim


def resample_indices(length: int, target_length: int) -> np.ndarray:
    """Evenly spaced indices round(j (L-1)/(M-1)), j = 0..M-1, into a sequence of length L."""
    if target_length < 1:
        raise ValueError(f"target_length must be >= 1, got {target_length}")
    if length < 1:
        raise ValueError("cannot resample an empty sequence")
    if target_length == 1:
        return np.zeros(1, dtype=np.int64)
    # exact rational rounding, halves away from zero
    j = np.arange(target_length, dtype=np.int64)
    num = j * (length - 1)
    den = target_length - 1
    return (2 * num + den) // (2 * den)


def evenly_resample(traj: Trajectory, target_length: int) -> Trajectory:
    """Subsequence of ``traj`` with exactly ``target_length`` evenly spaced states."""
    idx = resample_indices(len(traj), target_length)
    actions = None if traj.actions is None else traj.actions[idx]
    return traj.replace(states=traj.states[idx], actions=actions)

