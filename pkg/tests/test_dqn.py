import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otil import dqn, envs
from otil.reward_engine import Mode, RewardConfig, Transform
from otil.trajectory import ExpertSet, Trajectory
from otil.verify import finite_difference_gradient, gradient_relative_error, random_batch


def test_forward_examples():
    p = dqn.MlpParams([2, 2])
    p.weights[0][...] = np.eye(2)
    assert dqn.forward(p, [1.0, -2.0]).tolist() == [1.0, -2.0]

    q = dqn.MlpParams([2, 3, 2])
    q.weights[0][...] = -1.0
    q.biases[0][...] = -0.5
    q.weights[1][...] = 7.0
    q.biases[1][...] = [0.25, -3.0]
    assert dqn.forward(q, [1.0, 2.0]).tolist() == [0.25, -3.0]

    r = dqn.MlpParams.init([4, 8, 3], np.random.default_rng(0))
    r.weights[-1][...] = 0.0
    r.biases[-1][...] = 0.0
    assert dqn.forward(r, np.ones(4)).tolist() == [0.0, 0.0, 0.0]


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        dqn.forward(dqn.MlpParams([3, 2]), [1.0, 2.0])


def test_loss_zero_when_predictions_hit_targets():
    p = dqn.MlpParams([2, 2])
    p.biases[0][...] = [1.0, 2.0]
    batch = dqn.Batch(np.zeros((3, 2)), np.array([0, 1, 0]), np.array([1.0, 2.0, 1.0]), np.zeros((3, 2)), np.ones(3))
    loss, grad = dqn.loss_and_gradient(p, p, batch, 0.99)
    assert loss == 0.0 and np.all(grad.flat == 0)


def test_loss_empty_batch():
    p = dqn.MlpParams([2, 2])
    empty = dqn.Batch(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        dqn.loss_and_gradient(p, p, empty, 0.99)


def test_terminal_target_ignores_target_network():
    rng = np.random.default_rng(0)
    batch = random_batch(rng, 3, 2, 5)._replace(dones=np.ones(5))
    a = dqn.MlpParams.init([3, 4, 2], rng)
    b = dqn.MlpParams.init([3, 4, 2], rng)
    assert np.array_equal(dqn.td_targets(a, batch, 0.99), batch.rewards)
    assert np.array_equal(dqn.td_targets(b, batch, 0.99), batch.rewards)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 8), min_size=2, max_size=4), st.integers(1, 8), st.integers(0, 2**32))
def test_gradient_matches_finite_differences(sizes, B, seed):
    rng = np.random.default_rng(seed)
    params = dqn.MlpParams.init(sizes, rng)
    target = dqn.MlpParams.init(sizes, rng)
    batch = random_batch(rng, sizes[0], sizes[-1], B)
    _, grad = dqn.loss_and_gradient(params, target, batch, 0.9)
    assert gradient_relative_error(grad.flat, finite_difference_gradient(params, target, batch, 0.9)) < 1e-4


def test_adam_zero_gradient_leaves_params():
    p = dqn.MlpParams.init([3, 2], np.random.default_rng(0))
    new, state = dqn.adam_step(p, dqn.AdamState.zeros_like(p), dqn.MlpParams([3, 2]))
    assert new == p and state.step == 1


def test_adam_hand_computed_step():
    # m_hat = 1, v_hat = 1 after one step with g = 1
    p = dqn.MlpParams([1, 1])
    g = p.with_flat(np.array([1.0, 0.0]))
    new, state = dqn.adam_step(p, dqn.AdamState.zeros_like(p), g)
    assert new.flat[0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)
    assert new.flat[0] == pytest.approx(-0.000999999990, abs=1e-15)
    assert new.flat[1] == 0.0


def test_adam_deterministic_and_pure():
    rng = np.random.default_rng(1)
    p = dqn.MlpParams.init([3, 4, 2], rng)
    g = p.with_flat(rng.normal(size=p.flat.size))
    s = dqn.AdamState.zeros_like(p)
    before = p.flat.copy()
    a1, s1 = dqn.adam_step(p, s, g)
    a2, s2 = dqn.adam_step(p, s, g)
    assert a1 == a2 and np.array_equal(s1.m, s2.m) and np.array_equal(p.flat, before) and s.step == 0


def test_adam_shape_mismatch():
    p = dqn.MlpParams([3, 2])
    with pytest.raises(ValueError):
        dqn.adam_step(p, dqn.AdamState.zeros_like(p), np.zeros(3))


def test_act_greedy_and_ties():
    p = dqn.MlpParams([1, 2])
    p.biases[0][...] = [0.1, 0.9]
    rng = np.random.default_rng(0)
    assert dqn.act(p, [0.0], 0.0, rng) == 1
    p.biases[0][...] = [0.5, 0.5]
    assert dqn.act(p, [0.0], 0.0, rng) == 0


def test_act_uniform_when_epsilon_one():
    p = dqn.MlpParams([1, 4])
    rng = np.random.default_rng(5)
    n = 10_000
    counts = np.bincount([dqn.act(p, [0.0], 1.0, rng) for _ in range(n)], minlength=4)
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - n / 4) <= 3 * sigma)


def test_greedy_action_invariant_to_constant_shift():
    rng = np.random.default_rng(2)
    p = dqn.MlpParams.init([3, 5, 4], rng)
    shifted = p.copy()
    shifted.biases[-1][...] += 12.5
    for x in rng.normal(size=(50, 3)):
        assert dqn.greedy_action(p, x) == dqn.greedy_action(shifted, x)


def test_replay_buffer_ring():
    buf = dqn.ReplayBuffer(5, 1)
    for i in range(8):
        buf.push([i], 0, float(i), [i + 1], False)
        assert len(buf) <= 5
    assert sorted(buf.rewards.tolist()) == [3.0, 4.0, 5.0, 6.0, 7.0]
    batch = buf.sample(5, np.random.default_rng(0))
    assert sorted(batch.rewards.tolist()) == [3.0, 4.0, 5.0, 6.0, 7.0]


def test_epsilon_schedule():
    cfg = dqn.DqnConfig()
    eps = dqn.epsilon_schedule(cfg, 2000)
    assert eps[0] == 1.0 and np.all(np.diff(eps) <= 0) and eps.min() == 0.01


def test_moving_average_definition():
    vals = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert dqn.moving_average(vals, 2).tolist() == [1.0, 1.5, 2.5, 3.5, 4.5]
    assert dqn.moving_average(vals, 50).tolist() == [1.0, 1.5, 2.0, 2.5, 3.0]


def test_config_validation():
    with pytest.raises(ValueError):
        dqn.DqnConfig(discount=1.0)
    with pytest.raises(ValueError):
        dqn.DqnConfig(epsilon_end=0.5, epsilon_start=0.1)


def test_zero_episode_training():
    cfg = dqn.DqnConfig(train_episodes=0, seed=3)
    res = dqn.train_true_reward(envs.CartPoleParams(), cfg)
    fresh = dqn.MlpParams.init((4, 64, 64, 2), np.random.default_rng(np.random.SeedSequence(3).spawn(4)[0]))
    assert res.returns == [] and res.params == fresh


def _tiny_experts():
    rng = np.random.default_rng(0)
    return ExpertSet(tuple(Trajectory(states=rng.normal(size=(200, 4)) * 0.05) for _ in range(3)))


@pytest.mark.parametrize("mode", list(Mode))
def test_imitation_training_is_deterministic(mode):
    cfg = dqn.DqnConfig(train_episodes=15, seed=11, hidden_sizes=(16,))
    rc = RewardConfig(mode=mode, transform=Transform.EXP, projection_count=10)
    a = dqn.train_imitation(envs.CartPoleParams(), _tiny_experts(), rc, cfg)
    b = dqn.train_imitation(envs.CartPoleParams(), _tiny_experts(), rc, cfg)
    assert a.returns == b.returns and a.params == b.params
    assert len(a.returns) == 15 and a.moving_avg.shape == (15,)


def test_imitation_dimension_check():
    with pytest.raises(ValueError):
        dqn.train_imitation(envs.PendulumParams(), _tiny_experts(), RewardConfig(), dqn.DqnConfig(train_episodes=1))


def test_params_round_trip(tmp_path):
    p = dqn.MlpParams.init([4, 7, 3], np.random.default_rng(9))
    path = tmp_path / "net.txt"
    dqn.save_params(p, path)
    assert path.read_text().splitlines()[:2] == ["otil-mlp 1", "layers 4 7 3"]
    assert dqn.load_params(path) == p


def test_params_load_rejects_bad_files(tmp_path):
    path = tmp_path / "net.txt"
    path.write_text("otil-mlp 2\nlayers 1 1\n0\n0\n")
    with pytest.raises(ValueError):
        dqn.load_params(path)
    path.write_text("otil-mlp 1\nlayers 1 1\n0\n")
    with pytest.raises(ValueError):
        dqn.load_params(path)
