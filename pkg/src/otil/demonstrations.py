"""
Expert demonstrations: generation under perturbed physics and a text file format.

File layout (UTF-8, line oriented)::

    otil-demos 1.0 {"nominal_horizon": 200}
    {"env_name": "CartPole", "env_params": {...}, "seed": 7, "true_return": 200.0, "dim": 4, "length": 200, "has_actions": true}
    s_0,s_1,s_2,s_3,a
    ...
    <blank line>
    {...next trajectory header...}

Each timestep line holds the ``dim`` state components (17 significant
digits) followed by the action index when ``has_actions`` is true. The major
version must match; the minor version may differ.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dqn, envs
from .reward_engine import derive_seed
from .trajectory import ExpertSet, Trajectory, evenly_resample, resample_indices

__all__ = [
    "DemoFormatError",
    "ExpertGenerationError",
    "ExpertSet",
    "Trajectory",
    "evenly_resample",
    "generate_expert",
    "load_demo_set",
    "resample_indices",
    "save_demo_set",
    "train_expert",
]

log = logging.getLogger(__name__)

FORMAT_NAME = "otil-demos"
FORMAT_VERSION = "1.0"


class DemoFormatError(ValueError):
    """Malformed or inconsistent demonstration file."""

    def __init__(self, message: str, line: int | None = None, path=None):
        where = "" if path is None else f"{path}:"
        where += "" if line is None else f"{line}: "
        super().__init__(f"{where}{message}" if where else message)
        self.line = line


class ExpertGenerationError(RuntimeError):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def save_demo_set(experts: ExpertSet, path) -> None:
    out = [f"{FORMAT_NAME} {FORMAT_VERSION} " + json.dumps({"nominal_horizon": experts.nominal_horizon})]
    for i, tr in enumerate(experts):
        if i:
            out.append("")
        header = {
            "env_name": tr.env_name,
            "env_params": tr.env_params,
            "seed": tr.seed,
            "true_return": tr.true_return,
            "dim": tr.dim,
            "length": len(tr),
            "has_actions": tr.actions is not None,
        }
        out.append(json.dumps(header, sort_keys=True))
        for t, row in enumerate(tr.states):
            fields = [_num(x) for x in row]
            if tr.actions is not None:
                fields.append(str(int(tr.actions[t])))
            out.append(",".join(fields))
    Path(path).write_text("\n".join(out) + "\n")


def load_demo_set(path) -> ExpertSet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].strip():
        raise DemoFormatError("empty demonstration file", 1, path)
    first = lines[0].split(" ", 2)
    if len(first) < 2 or first[0] != FORMAT_NAME:
        raise DemoFormatError(f"missing '{FORMAT_NAME}' header", 1, path)
    major = first[1].split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise DemoFormatError(f"unsupported format version {first[1]}", 1, path)
    try:
        meta = json.loads(first[2]) if len(first) > 2 else {}
    except json.JSONDecodeError as exc:
        raise DemoFormatError(f"bad file metadata: {exc}", 1, path) from None

    trajectories = []
    i = 1
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        try:
            header = json.loads(lines[i])
            dim, length, has_actions = int(header["dim"]), int(header["length"]), bool(header["has_actions"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DemoFormatError(f"bad trajectory header: {exc}", i + 1, path) from None
        if length < 1 or dim < 1:
            raise DemoFormatError("trajectory must have length >= 1 and dim >= 1", i + 1, path)
        states = np.empty((length, dim))
        actions = np.empty(length, dtype=np.int64) if has_actions else None
        width = dim + int(has_actions)
        for t in range(length):
            lineno = i + 2 + t
            if lineno > n or not lines[lineno - 1].strip():
                raise DemoFormatError(f"expected {length} timesteps, found {t}", lineno, path)
            fields = lines[lineno - 1].split(",")
            if len(fields) != width:
                raise DemoFormatError(f"expected {width} fields, got {len(fields)} (state dimension is {dim})", lineno, path)
            try:
                states[t] = [float(x) for x in fields[:dim]]
                if has_actions:
                    actions[t] = int(fields[dim])
            except ValueError as exc:
                raise DemoFormatError(str(exc), lineno, path) from None
        try:
            tr = Trajectory(
                states=states,
                actions=actions,
                env_name=header.get("env_name", ""),
                env_params=header.get("env_params") or {},
                seed=header.get("seed"),
                true_return=float(header.get("true_return", float("nan"))),
            )
        except ValueError as exc:
            raise DemoFormatError(str(exc), i + 1, path) from None
        trajectories.append(tr)
        i += 1 + length
        if i < n and lines[i].strip():
            raise DemoFormatError("expected a blank line between trajectories", i + 1, path)

    if not trajectories:
        raise DemoFormatError("no trajectories in demonstration file", None, path)
    try:
        return ExpertSet(tuple(trajectories), nominal_horizon=int(meta.get("nominal_horizon", 200)))
    except ValueError as exc:
        raise DemoFormatError(str(exc), None, path) from None


def _accept_cartpole(params, env_params, rollout_seed):
    traj = dqn.greedy_rollout(params, env_params, rollout_seed)
    if traj.true_return < env_params.max_steps:
        return None
    # a single perfect rollout can be luck; insist the policy is reliable
    if dqn.evaluate(params, env_params, 10, derive_seed(rollout_seed, 1)).mean() < 0.975 * env_params.max_steps:
        return None
    return traj


def train_expert(env_params: envs.EnvParams, dqn_config: dqn.DqnConfig, demo_seed: int, max_retries: int = 3, check_every: int = 5):
    """Train a DQN on true rewards and record one accepted greedy rollout.

    CartPole: training stops at the first check where a greedy rollout lasts
    the full episode (and 10 further greedy rollouts average >= 97.5% of it).
    Pendulum: after the full budget, 20 greedy rollouts are drawn and the
    first one at or above their 75th percentile is kept.

    Returns (trajectory, policy parameters).
    """
    for attempt in range(max_retries):
        seed = derive_seed(demo_seed, attempt)
        config = replace(dqn_config, seed=seed)
        found: dict = {}

        if isinstance(env_params, envs.CartPoleParams):
            def stop(ep, params, returns):
                if ep % check_every != check_every - 1:
                    return False
                traj = _accept_cartpole(params, env_params, derive_seed(seed, ep))
                if traj is not None:
                    found["traj"], found["params"] = traj, params
                    return True
                return False

            dqn.train_true_reward(env_params, config, stop)
        else:
            result = dqn.train_true_reward(env_params, config)
            rollouts = [dqn.greedy_rollout(result.params, env_params, derive_seed(seed, 10_000 + j)) for j in range(20)]
            bar = np.percentile([r.true_return for r in rollouts], 75)
            found["traj"] = next(r for r in rollouts if r.true_return >= bar)
            found["params"] = result.params

        if "traj" in found:
            log.info("expert %s accepted on attempt %d, return %.1f", env_params, attempt, found["traj"].true_return)
            return found["traj"], found["params"]
        log.info("expert %s attempt %d failed the quality bar", env_params, attempt)

    raise ExpertGenerationError(f"no expert met the quality bar after {max_retries} attempts for {env_params}")


def generate_expert(env_params: envs.EnvParams, dqn_config: dqn.DqnConfig, demo_seed: int, max_retries: int = 3) -> Trajectory:
    return train_expert(env_params, dqn_config, demo_seed, max_retries)[0]

