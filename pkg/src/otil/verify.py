"""Fast self-checks of the core invariants, run by ``otil verify``."""

from __future__ import annotations

import itertools
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import dqn, ot_core
from .demonstrations import ExpertSet, Trajectory, load_demo_set, save_demo_set
from .reward_engine import scotil_costs, smmotil_costs


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


def brute_force_w2(x, y) -> float:
    """Minimum over all bijections of the mean squared matching cost."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return min(float(np.mean((x - y[list(p)]) ** 2)) for p in itertools.permutations(range(len(y))))


def check_oracle_equivalence(w2_fn: Callable = ot_core.w2_squared_1d, instances: int = 300, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        T = int(rng.integers(1, 7))
        x, y = rng.normal(size=T) * 3, rng.normal(size=T) * 3
        err = abs(w2_fn(np.sort(x), np.sort(y)) - brute_force_w2(x, y))
        worst = max(worst, err)
        if err > 1e-9:
            raise AssertionError(f"closed form differs from brute force by {err:.3g} at T={T}")
    return f"max abs error {worst:.2g}"


def check_two_marginal_reduction(instances: int = 100, seed: int = 1) -> str:
    rng = np.random.default_rng(seed)
    half = ot_core.BarycentricWeights.uniform(2)
    worst = 0.0
    for i in range(instances):
        d, T, K = int(rng.integers(1, 6)), int(rng.integers(1, 51)), int(rng.integers(1, 21))
        mu, nu = rng.normal(size=(T, d)), rng.normal(size=(T, d)) + rng.normal(size=d)
        proj = ot_core.sample_projections(d, K, seed * 1000 + i)
        err = abs(ot_core.sliced_mw_squared([mu, nu], half, proj) - ot_core.sliced_w2_squared(mu, nu, proj) / 4)
        worst = max(worst, err)
        if err > 1e-9:
            raise AssertionError(f"two-marginal reduction off by {err:.3g}")
    return f"max abs error {worst:.2g}"


def check_reward_sums(instances: int = 100, seed: int = 2) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        d, T, K, P = int(rng.integers(1, 6)), int(rng.integers(1, 41)), int(rng.choice([1, 5, 50])), int(rng.integers(1, 6))
        agent = rng.normal(size=(T, d))
        experts = [rng.normal(size=(T, d)) * rng.uniform(0.5, 2) for _ in range(P)]
        proj = ot_core.sample_projections(d, K, seed * 1000 + i)
        lam = ot_core.BarycentricWeights(rng.dirichlet(np.ones(P + 1)))
        e1 = abs(scotil_costs(agent, experts[0], proj).sum() - ot_core.sliced_w2_squared(agent, experts[0], proj))
        e2 = abs(smmotil_costs(agent, experts, lam, proj).sum() - ot_core.sliced_mw_squared([agent, *experts], lam, proj))
        worst = max(worst, e1, e2)
        if max(e1, e2) > 1e-9:
            raise AssertionError(f"reward-sum identity off by {max(e1, e2):.3g}")
    return f"max abs error {worst:.2g}"


def random_batch(rng, d: int, n_actions: int, B: int) -> dqn.Batch:
    return dqn.Batch(
        states=rng.normal(size=(B, d)),
        actions=rng.integers(n_actions, size=B),
        rewards=rng.normal(size=B),
        next_states=rng.normal(size=(B, d)),
        dones=(rng.random(B) < 0.3).astype(np.float64),
    )


def finite_difference_gradient(params, target, batch, discount, h: float = 1e-5) -> np.ndarray:
    grad = np.empty_like(params.flat)
    for i in range(params.flat.size):
        plus, minus = params.flat.copy(), params.flat.copy()
        plus[i] += h
        minus[i] -= h
        lp, _ = dqn.loss_and_gradient(params.with_flat(plus), target, batch, discount)
        lm, _ = dqn.loss_and_gradient(params.with_flat(minus), target, batch, discount)
        grad[i] = (lp - lm) / (2 * h)
    return grad


def gradient_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(instances: int = 20, seed: int = 3) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        sizes = [int(rng.integers(1, 9)) for _ in range(int(rng.integers(2, 5)))]
        params = dqn.MlpParams.init(sizes, rng)
        target = dqn.MlpParams.init(sizes, rng)
        batch = random_batch(rng, sizes[0], sizes[-1], int(rng.integers(1, 9)))
        _, grad = dqn.loss_and_gradient(params, target, batch, 0.99)
        err = gradient_relative_error(grad.flat, finite_difference_gradient(params, target, batch, 0.99))
        worst = max(worst, err)
        if err > 1e-4:
            raise AssertionError(f"gradient relative error {err:.3g} for layers {sizes}")
    return f"max relative error {worst:.2g}"


def check_serialization(instances: int = 20, seed: int = 4) -> str:
    rng = np.random.default_rng(seed)
    with tempfile.TemporaryDirectory() as tmp:
        demo_path = Path(tmp) / "demos.txt"
        net_path = Path(tmp) / "net.txt"
        for i in range(instances):
            d = int(rng.integers(1, 6))
            trajs = tuple(_random_traj(rng, d, with_actions=j % 2 == 0) for j in range(int(rng.integers(1, 4))))
            experts = ExpertSet(trajs, nominal_horizon=int(rng.integers(1, 300)))
            save_demo_set(experts, demo_path)
            if load_demo_set(demo_path) != experts:
                raise AssertionError("demo set round-trip changed the data")
            params = dqn.MlpParams.init([int(rng.integers(1, 9)) for _ in range(3)], rng)
            dqn.save_params(params, net_path)
            if dqn.load_params(net_path) != params:
                raise AssertionError("network parameter round-trip changed the data")
    return f"{instances} round-trips"


def _random_traj(rng, d: int, with_actions: bool) -> Trajectory:
    L = int(rng.integers(1, 30))
    return Trajectory(
        states=rng.normal(size=(L, d)) * 10.0 ** rng.integers(-5, 6),
        actions=rng.integers(0, 5, size=L) if with_actions else None,
        env_name="CartPole",
        env_params={"pole_half_length": float(rng.uniform(0.1, 2))},
        seed=int(rng.integers(2**62)),
        true_return=float(rng.normal()),
    )


def default_checks(w2_fn: Callable = ot_core.w2_squared_1d) -> list[tuple[str, Callable[[], str]]]:
    return [
        ("ot-oracle-equivalence", lambda: check_oracle_equivalence(w2_fn)),
        ("two-marginal-reduction", check_two_marginal_reduction),
        ("reward-sum-identities", check_reward_sums),
        ("dqn-gradient-check", check_gradients),
        ("serialization-round-trip", check_serialization),
    ]


def run_checks(checks=None) -> list[CheckResult]:
    results = []
    for name, fn in checks or default_checks():
        t0 = time.perf_counter()
        try:
            detail = fn()
            passed = True
        except Exception as exc:  # a crashing check is a failing check
            detail = f"{type(exc).__name__}: {exc}"
            passed = False
        results.append(CheckResult(name, passed, time.perf_counter() - t0, detail))
    return results


def format_report(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.3f}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
