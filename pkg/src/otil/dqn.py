"""
Deep Q-learning in plain numpy.

The Q-network is a rectifier MLP whose parameters live in one flat float64
vector; per-layer weight matrices and bias vectors are views into it. That
keeps the Adam update to a handful of vector operations.

Training runs whole episodes with an epsilon-greedy policy. Transitions are
staged until the episode ends, relabeled (pseudo-rewards from the reward
engine, or the true environment reward when training experts) and only then
pushed into the replay buffer. One gradient step is taken per environment
step once the buffer holds a full batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import envs
from .reward_engine import Relabeler, RewardConfig, derive_seed
from .trajectory import ExpertSet, Trajectory

PARAMS_FORMAT = "otil-mlp"
PARAMS_VERSION = 1


class MlpParams:
    """Weights and biases of a rectifier MLP, backed by a single flat vector."""

    __slots__ = ("layer_sizes", "flat", "weights", "biases")

    def __init__(self, layer_sizes: Sequence[int], flat: np.ndarray | None = None):
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"layer_sizes must list at least input and output widths, got {sizes}")
        n = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
        flat = np.zeros(n) if flat is None else np.asarray(flat, dtype=np.float64)
        if flat.shape != (n,):
            raise ValueError(f"expected {n} parameters for layers {sizes}, got shape {flat.shape}")
        self.layer_sizes = sizes
        self.flat = flat
        self.weights = []
        self.biases = []
        off = 0
        for a, b in zip(sizes[:-1], sizes[1:]):
            self.weights.append(flat[off : off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(flat[off : off + b])
            off += b

    @classmethod
    def init(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "MlpParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
        p = cls(layer_sizes)
        for W, b in zip(p.weights, p.biases):
            bound = 1.0 / np.sqrt(W.shape[0])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        return p

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_sizes, self.flat.copy())

    def with_flat(self, flat: np.ndarray) -> "MlpParams":
        return MlpParams(self.layer_sizes, flat)

    @property
    def n_actions(self) -> int:
        return self.layer_sizes[-1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpParams):
            return NotImplemented
        return self.layer_sizes == other.layer_sizes and np.array_equal(self.flat, other.flat)

    def __repr__(self) -> str:
        return f"MlpParams(layer_sizes={self.layer_sizes})"


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, learning_rate: float = 1e-3) -> "AdamState":
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), 0, learning_rate)


@dataclass(frozen=True)
class DqnConfig:
    discount: float = 0.99
    batch_size: int = 32
    learning_rate: float = 1e-3
    buffer_capacity: int = 2000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay: float = 0.995
    target_sync_interval: int = 100  # 0 disables the target network
    hidden_sizes: tuple[int, ...] = (64, 64)
    train_episodes: int = 500
    moving_average_window: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0 < self.discount < 1:
            raise ValueError("discount must be in (0, 1)")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("batch_size must be >= 1 and fit in the buffer")
        if self.train_episodes < 0 or self.target_sync_interval < 0:
            raise ValueError("train_episodes and target_sync_interval must be >= 0")
        if self.moving_average_window < 1:
            raise ValueError("moving_average_window must be >= 1")


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.position = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, done):
        i = self.position
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.position = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def extend(self, states, actions, rewards, next_states, dones):
        for row in zip(states, actions, rewards, next_states, dones):
            self.push(*row)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx])


def forward(params: MlpParams, x) -> np.ndarray:
    """Q-values for one state (1D input) or a batch of states (2D input)."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != params.layer_sizes[0]:
        raise ValueError(f"input has dimension {h.shape[-1]}, network expects {params.layer_sizes[0]}")
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def td_targets(target_params: MlpParams, batch: Batch, discount: float) -> np.ndarray:
    """r for terminal transitions, r + discount * max_a Q_target(s', a) otherwise."""
    q_next = forward(target_params, batch.next_states).max(axis=1)
    return batch.rewards + discount * (1.0 - batch.dones) * q_next


def loss_and_gradient(params: MlpParams, target_params: MlpParams, batch: Batch, discount: float) -> tuple[float, MlpParams]:
    """Mean squared TD error on the taken actions and its exact gradient."""
    B = len(batch.actions)
    if B == 0:
        raise ValueError("empty batch")
    y = td_targets(target_params, batch, discount)

    acts = [np.asarray(batch.states, dtype=np.float64)]
    last = len(params.weights) - 1
    h = acts[0]
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    rows = np.arange(B)
    diff = h[rows, batch.actions] - y
    loss = float(np.mean(diff**2))

    grad = MlpParams(params.layer_sizes)
    dz = np.zeros_like(h)
    dz[rows, batch.actions] = 2.0 * diff / B
    for i in range(last, -1, -1):
        grad.weights[i][...] = acts[i].T @ dz
        grad.biases[i][...] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ params.weights[i].T) * (acts[i] > 0)
    return loss, grad


def adam_step(params: MlpParams, adam: AdamState, gradient: MlpParams) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    g = gradient.flat if isinstance(gradient, MlpParams) else np.asarray(gradient, dtype=np.float64)
    if g.shape != params.flat.shape or adam.m.shape != params.flat.shape:
        raise ValueError("gradient, optimizer state and parameters must have the same shape")
    t = adam.step + 1
    m = adam.beta1 * adam.m + (1 - adam.beta1) * g
    v = adam.beta2 * adam.v + (1 - adam.beta2) * g * g
    m_hat = m / (1 - adam.beta1**t)
    v_hat = v / (1 - adam.beta2**t)
    flat = params.flat - adam.learning_rate * m_hat / (np.sqrt(v_hat) + adam.eps)
    return params.with_flat(flat), replace(adam, m=m, v=v, step=t)


def greedy_action(params: MlpParams, state) -> int:
    return int(np.argmax(forward(params, state)))


def act(params: MlpParams, state, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action; greedy ties go to the lowest index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(params.n_actions))
    return greedy_action(params, state)


def epsilon_schedule(config: DqnConfig, episodes: int) -> np.ndarray:
    eps = config.epsilon_start * config.epsilon_decay ** np.arange(episodes)
    return np.maximum(eps, config.epsilon_end)


def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Mean of the last min(e, window) values at every position e (1-based)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return v.copy()
    c = np.concatenate([[0.0], np.cumsum(v)])
    e = np.arange(1, v.size + 1)
    lo = np.maximum(e - window, 0)
    return (c[e] - c[lo]) / (e - lo)


@dataclass
class TrainResult:
    returns: list[float]
    moving_avg: np.ndarray
    params: MlpParams
    episodes_run: int = 0
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)


StopFn = Callable[[int, MlpParams, list], bool]


def _seeds(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def run_dqn(env_params: envs.EnvParams, config: DqnConfig, relabeler: Relabeler | None = None, stop: StopFn | None = None) -> TrainResult:
    """Train a DQN for ``config.train_episodes`` episodes.

    With ``relabeler`` the agent learns from pseudo-rewards; otherwise from the
    true environment reward. True returns are always recorded. ``stop`` is
    called after every episode with (episode, params, returns) and may end
    training early.
    """
    init_rng, env_rng, act_rng, sample_rng = _seeds(config.seed)
    sizes = (env_params.obs_dim, *config.hidden_sizes, env_params.n_actions)
    params = MlpParams.init(sizes, init_rng)
    target = params
    adam = AdamState.zeros_like(params, config.learning_rate)
    buffer = ReplayBuffer(config.buffer_capacity, env_params.obs_dim)
    eps_seq = epsilon_schedule(config, config.train_episodes)
    returns: list[float] = []
    total_steps = 0
    stopped = False

    for episode in range(config.train_episodes):
        eps = eps_seq[episode]
        state = envs.reset(env_params, env_rng)
        obs = envs.state_vector(state)
        obs_list, act_list, rew_list, next_list, done_list = [], [], [], [], []
        ep_return = 0.0
        terminated = False
        while not terminated:
            a = act(params, obs, eps, act_rng)
            state, r, terminated = envs.step(state, a, env_params)
            nobs = envs.state_vector(state)
            obs_list.append(obs)
            act_list.append(a)
            rew_list.append(r)
            next_list.append(nobs)
            # time-limit endings still bootstrap
            done_list.append(terminated and envs.failed(state, env_params))
            ep_return += r
            obs = nobs
            total_steps += 1

            if len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size, sample_rng)
                _, grad = loss_and_gradient(params, target if config.target_sync_interval else params, batch, config.discount)
                params, adam = adam_step(params, adam, grad)
            if config.target_sync_interval and total_steps % config.target_sync_interval == 0:
                target = params

        if relabeler is not None:
            episode_seed = derive_seed(config.seed, episode)
            rewards = relabeler(np.asarray(next_list), episode_seed, actions=act_list).rewards
        else:
            rewards = rew_list
        buffer.extend(obs_list, act_list, rewards, next_list, done_list)
        returns.append(ep_return)
        if stop is not None and stop(episode, params, returns):
            stopped = True
            break

    return TrainResult(
        returns=returns,
        moving_avg=moving_average(returns, config.moving_average_window),
        params=params,
        episodes_run=len(returns),
        stopped_early=stopped,
    )


def train_imitation(env_params: envs.EnvParams, experts: ExpertSet, reward_config: RewardConfig, dqn_config: DqnConfig) -> TrainResult:
    """Train on OT pseudo-rewards against ``experts``; true returns are kept for evaluation only."""
    if experts.dim != env_params.obs_dim:
        raise ValueError(f"expert state dimension {experts.dim} != environment observation dimension {env_params.obs_dim}")
    return run_dqn(env_params, dqn_config, relabeler=Relabeler(experts, reward_config))


def train_true_reward(env_params: envs.EnvParams, dqn_config: DqnConfig, stop: StopFn | None = None) -> TrainResult:
    return run_dqn(env_params, dqn_config, relabeler=None, stop=stop)


def greedy_rollout(params: MlpParams, env_params: envs.EnvParams, seed: int) -> Trajectory:
    """One greedy episode; records the state before each action and that action."""
    state = envs.reset(env_params, seed)
    states, actions = [], []
    total = 0.0
    terminated = False
    while not terminated:
        obs = envs.state_vector(state)
        a = greedy_action(params, obs)
        states.append(obs)
        actions.append(a)
        state, r, terminated = envs.step(state, a, env_params)
        total += r
    return Trajectory(
        states=np.array(states),
        actions=np.array(actions),
        env_name=env_params.name,
        env_params=env_params.to_dict(),
        seed=seed,
        true_return=total,
    )


def evaluate(params: MlpParams, env_params: envs.EnvParams, episodes: int, seed: int) -> np.ndarray:
    """True returns of ``episodes`` greedy rollouts with seeds derived from ``seed``."""
    return np.array([greedy_rollout(params, env_params, derive_seed(seed, i)).true_return for i in range(episodes)])


def save_params(params: MlpParams, path) -> None:
    """Text format: a version line, a layer-size line, then every layer's
    weight rows (row-major, input index first) followed by its bias row."""
    lines = [f"{PARAMS_FORMAT} {PARAMS_VERSION}", "layers " + " ".join(map(str, params.layer_sizes))]
    for W, b in zip(params.weights, params.biases):
        lines.extend(" ".join(repr(float(x)) for x in row) for row in W)
        lines.append(" ".join(repr(float(x)) for x in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> MlpParams:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise ValueError(f"{path}: truncated parameter file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != PARAMS_FORMAT:
        raise ValueError(f"{path}:1: not an {PARAMS_FORMAT} file")
    if int(head[1]) != PARAMS_VERSION:
        raise ValueError(f"{path}:1: unsupported version {head[1]}")
    fields = lines[1].split()
    if not fields or fields[0] != "layers":
        raise ValueError(f"{path}:2: expected a 'layers' line")
    sizes = [int(x) for x in fields[1:]]
    params = MlpParams(sizes)
    row = 2
    for W, b in zip(params.weights, params.biases):
        for target in [*W, b]:
            if row >= len(lines):
                raise ValueError(f"{path}: truncated parameter file")
            vals = [float(x) for x in lines[row].split()]
            if len(vals) != target.size:
                raise ValueError(f"{path}:{row + 1}: expected {target.size} values, got {len(vals)}")
            target[...] = vals
            row += 1
    if any(line.strip() for line in lines[row:]):
        raise ValueError(f"{path}:{row + 1}: trailing data")
    return params
