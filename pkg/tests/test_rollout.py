import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from svrpo.envs import PendulumEnv, PointMassEnv
from svrpo.numkit import Rng
from svrpo.policy import GaussianMlpPolicy, PolicyArchitecture
from svrpo.rollout import (LinearBaseline, Trajectory, build_batch, collect,
                           discounted_returns, dump_trajectories, fit_baseline)


def _policy(env, seed=0):
    return GaussianMlpPolicy(PolicyArchitecture(env.obs_dim, env.action_dim, (8,)), rng=Rng(seed))


def test_collect_whole_episodes():
    env = PointMassEnv()
    trajs = collect(_policy(env), env, 200, Rng(0))
    assert len(trajs) == 2 and all(len(t) == 100 for t in trajs)
    trajs = collect(_policy(env), env, 250, Rng(0))
    assert sum(len(t) for t in trajs) == 300


def test_collect_requires_horizon():
    env = PointMassEnv()
    with pytest.raises(ValueError):
        collect(_policy(env), env, 50, Rng(0))


def test_collect_deterministic():
    env = PendulumEnv()
    a = collect(_policy(env), env, 400, Rng(3))
    b = collect(_policy(env), env, 400, Rng(3))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.observations, y.observations)
        np.testing.assert_array_equal(x.actions, y.actions)
        np.testing.assert_array_equal(x.rewards, y.rewards)
    assert [tx.t for tx in a[0].transitions()] == list(range(200))


def _random_policy_return(n_episodes):
    env = PendulumEnv()
    arch = PolicyArchitecture(env.obs_dim, env.action_dim, (32, 32))
    trajs = collect(GaussianMlpPolicy(arch, rng=Rng(0)), env, n_episodes * env.horizon, Rng(11))
    return np.array([t.total_reward for t in trajs])


# Monte-Carlo oracle: 1000 episodes of the seed-0 default-init policy, Rng(11).
PENDULUM_RANDOM_POLICY_MEAN_RETURN = -1376.41857195559


def test_pendulum_random_policy_return_fixture():
    returns = _random_policy_return(1000)
    assert returns.mean() == pytest.approx(PENDULUM_RANDOM_POLICY_MEAN_RETURN, abs=1e-6)
    # sanity against the uniform-angle scale: E[theta^2] = pi^2/3 per step
    assert -2.5 * np.pi ** 2 / 3 * 200 < returns.mean() < -0.5 * np.pi ** 2 / 3 * 200


def test_discounted_returns_examples():
    np.testing.assert_allclose(discounted_returns([1, 1, 1], 0.5), [1.75, 1.5, 1.0])
    assert discounted_returns([3.0], 0.9)[0] == 3.0
    with pytest.raises(ValueError):
        discounted_returns([1.0], 1.0)


@settings(max_examples=50)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-10, 10)),
       st.floats(0.01, 0.99))
def test_discounted_returns_recursion(rewards, gamma):
    R = discounted_returns(rewards, gamma)
    np.testing.assert_allclose(R[:-1] - rewards[:-1] - gamma * R[1:], 0.0, atol=1e-9)
    assert R[-1] == rewards[-1]
    assert R[0] == pytest.approx(np.sum(gamma ** np.arange(len(rewards)) * rewards), abs=1e-9)


def _trajs(seed, n=3, T=20, obs_dim=3):
    rng = np.random.default_rng(seed)
    return [Trajectory(rng.normal(size=(T, obs_dim)), rng.normal(size=(T, 1)), rng.normal(size=T))
            for _ in range(n)]


def test_baseline_zero_targets():
    trajs = [Trajectory(t.observations, t.actions, np.zeros(len(t))) for t in _trajs(0)]
    np.testing.assert_array_equal(fit_baseline(trajs, 0.9).coefficients, 0.0)


def test_baseline_recovers_linear_targets():
    # construct rewards whose discounted returns are exactly phi @ c
    gamma = 0.9
    trajs = _trajs(1)
    c = np.random.default_rng(2).normal(size=LinearBaseline.features(np.zeros((1, 3)), [0]).shape[1])
    exact = []
    for tr in trajs:
        R = LinearBaseline.features(tr.observations, tr.timesteps) @ c
        r = R - gamma * np.r_[R[1:], 0.0]
        exact.append(Trajectory(tr.observations, tr.actions, r))
    b = fit_baseline(exact, gamma, ridge=1e-12)
    for tr in exact:
        resid = discounted_returns(tr, gamma) - b.predict(tr.observations, tr.timesteps)
        assert np.max(np.abs(resid)) <= 1e-8


def test_baseline_normal_equations():
    trajs, gamma = _trajs(3), 0.95
    b = fit_baseline(trajs, gamma)
    obs = np.concatenate([t.observations for t in trajs])
    ts = np.concatenate([t.timesteps for t in trajs])
    R = np.concatenate([discounted_returns(t, gamma) for t in trajs])
    phi = LinearBaseline.features(obs, ts)
    np.testing.assert_allclose(phi.T @ (R - phi @ b.coefficients) - 1e-5 * b.coefficients, 0.0, atol=1e-8)
    assert np.mean((R - phi @ b.coefficients) ** 2) <= np.mean(R ** 2)


def _env_batch(normalize=True, baseline=None):
    env = PointMassEnv()
    policy = _policy(env, 4)
    trajs = collect(policy, env, 300, Rng(5))
    return policy, trajs, build_batch(policy, trajs, baseline or LinearBaseline(), 0.99, normalize)


def test_batch_standardized():
    _, trajs, batch = _env_batch()
    assert batch.size == sum(len(t) for t in trajs)
    assert abs(batch.advantages.mean()) <= 1e-10
    assert abs(batch.advantages.std() - 1) <= 1e-10


def test_batch_zero_baseline_advantages_are_returns():
    _, trajs, batch = _env_batch(normalize=False)
    R = np.concatenate([discounted_returns(t, 0.99) for t in trajs])
    np.testing.assert_array_equal(batch.advantages, R)


def test_batch_anchor_log_probs_frozen():
    policy, _, batch = _env_batch()
    np.testing.assert_array_equal(policy.log_prob(batch.observations, batch.actions), batch.anchor_log_probs)
    np.testing.assert_array_equal(batch.anchor_params, policy.params)
    with pytest.raises(ValueError):
        batch.advantages[0] = 0.0
    with pytest.raises(Exception):
        batch.advantages = None


def test_dump_trajectories(tmp_path):
    import json
    _, trajs, _ = _env_batch()
    path = tmp_path / "e.jsonl"
    dump_trajectories(path, 3, trajs)
    lines = path.read_text().splitlines()
    assert len(lines) == 300
    row = json.loads(lines[101])
    assert set(row) == {"epoch", "traj_id", "t", "obs", "act", "reward"}
    assert (row["epoch"], row["traj_id"], row["t"]) == (3, 1, 1)
    assert row["reward"] == trajs[1].rewards[1]
