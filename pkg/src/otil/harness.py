"""
Experiment runner: expert generation, multi-seed imitation training and CSV output.

Per (mode, seed) ``curve_<mode>_<seed>.csv`` has columns
``episode,true_return,moving_avg`` and per mode ``summary_<mode>.csv`` has
``episode,mean,std``, where mean and std are taken across seeds of the
moving averages (population std, ddof=0). Episodes are numbered from 1. Each
file starts with a ``#`` comment line recording the moving-average window.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dqn
from .config import ExperimentConfig
from .demonstrations import ExpertSet, generate_expert, load_demo_set, save_demo_set
from .reward_engine import Mode, derive_seed

log = logging.getLogger(__name__)


class ValidationError(ValueError):
    pass


@dataclass
class RunResult:
    window: int
    curves: dict = field(default_factory=dict)  # (mode, seed) -> (returns, moving_avg)
    summary: dict = field(default_factory=dict)  # mode -> (mean, std)


def _gen_one(args):
    env_params, dqn_config, demo_seed = args
    return generate_expert(env_params, dqn_config, demo_seed)


def gen_experts(config: ExperimentConfig, out_path, parallelism: int | None = None, echo=print) -> ExpertSet:
    """Train one expert per configured parameter value and write the demo set."""
    jobs = [
        (params, config.dqn_for(0, config.expert_train_episodes), derive_seed(config.demo_seed, i))
        for i, params in enumerate(config.expert_envs())
    ]
    workers = parallelism or config.parallelism
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            trajs = list(pool.map(_gen_one, jobs))
    else:
        trajs = [_gen_one(j) for j in jobs]
    for value, tr in zip(config.expert_param_values, trajs):
        echo(f"expert {config.param_field}={value:g}: true return {tr.true_return:g} over {len(tr)} steps")
    experts = ExpertSet(tuple(trajs), nominal_horizon=config.agent_env().max_steps)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_demo_set(experts, out_path)
    return experts


def validate_demos(config: ExperimentConfig, experts: ExpertSet) -> None:
    env = config.agent_env()
    if experts.dim != env.obs_dim:
        raise ValidationError(f"demonstrations have state dimension {experts.dim}, {env.name} observations have {env.obs_dim}")
    names = {tr.env_name for tr in experts if tr.env_name}
    if names and names != {env.name}:
        raise ValidationError(f"demonstrations come from {sorted(names)}, config trains on {env.name}")


def _train_one(args):
    config, experts, mode, seed = args
    result = dqn.train_imitation(config.agent_env(), experts, config.reward_for(mode), config.dqn_for(seed))
    return mode, seed, result.returns, result.moving_avg


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, window: int, header: str, rows) -> None:
    lines = [f"# moving_average_window={window}", header]
    lines.extend(",".join(r) for r in rows)
    path.write_text("\n".join(lines) + "\n")


def summarize(curves: dict, modes, seeds) -> dict:
    summary = {}
    for mode in modes:
        stacked = np.array([curves[(mode, s)][1] for s in seeds])
        if stacked.size == 0:
            summary[mode] = (np.zeros(0), np.zeros(0))
        else:
            summary[mode] = (stacked.mean(axis=0), stacked.std(axis=0))
    return summary


def train(config: ExperimentConfig, experts: ExpertSet, out_dir, seed_offset: int = 0, parallelism: int | None = None) -> RunResult:
    """Run every (mode, seed) pair in the agent environment and write the CSVs."""
    validate_demos(config, experts)
    seeds = [s + seed_offset for s in config.seeds]
    jobs = [(config, experts, mode, seed) for mode in config.modes for seed in seeds]
    workers = parallelism or config.parallelism
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outputs = list(pool.map(_train_one, jobs))
    else:
        outputs = [_train_one(j) for j in jobs]

    result = RunResult(window=config.moving_average_window)
    for mode, seed, returns, ma in outputs:
        result.curves[(mode, seed)] = (np.asarray(returns, dtype=np.float64), np.asarray(ma, dtype=np.float64))
    result.summary = summarize(result.curves, config.modes, seeds)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (mode, seed), (returns, ma) in sorted(result.curves.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        rows = ((str(e + 1), _fmt(r), _fmt(m)) for e, (r, m) in enumerate(zip(returns, ma)))
        _write_csv(out / f"curve_{mode.value}_{seed}.csv", result.window, "episode,true_return,moving_avg", rows)
    for mode, (mean, std) in result.summary.items():
        rows = ((str(e + 1), _fmt(m), _fmt(s)) for e, (m, s) in enumerate(zip(mean, std)))
        _write_csv(out / f"summary_{mode.value}.csv", result.window, "episode,mean,std", rows)
    return result


def train_from_file(config: ExperimentConfig, demo_path, out_dir, seed_offset: int = 0, parallelism: int | None = None) -> RunResult:
    experts = load_demo_set(demo_path)
    return train(config, experts, out_dir, seed_offset, parallelism)


class CsvError(ValueError):
    pass


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read one of the harness CSVs; returns (column names, float rows)."""
    path = Path(path)
    header = None
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split(",")
        if header is None:
            header = [f.strip() for f in fields]
            continue
        if len(fields) != len(header):
            raise CsvError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise CsvError(f"{path}:{lineno}: {exc}") from None
    if header is None:
        raise CsvError(f"{path}: missing header line")
    return header, np.array(rows, dtype=np.float64).reshape(len(rows), len(header))


def final_span_stats(summary: dict, fraction: float = 0.2) -> dict:
    """Per mode: (mean of the cross-seed mean, mean of the cross-seed std) over the last ``fraction`` of episodes."""
    stats = {}
    for mode, (mean, std) in summary.items():
        n = len(mean)
        start = n - max(1, int(round(fraction * n))) if n else 0
        stats[Mode(mode)] = (float(np.mean(mean[start:])) if n else float("nan"), float(np.mean(std[start:])) if n else float("nan"))
    return stats
