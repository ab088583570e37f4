import math

import numpy as np
import pytest

from svrpo.envs import EnvDoneError, EnvState, PendulumEnv, PointMassEnv, make_env, wrap_angle
from svrpo.numkit import Rng


@pytest.mark.parametrize("name", ["pointmass", "pendulum"])
def test_reset_deterministic(name):
    env = make_env(name)
    a, b = env.reset(Rng(5)), env.reset(Rng(5))
    np.testing.assert_array_equal(a.physical, b.physical)


def test_pointmass_reset_velocity_zero():
    s = PointMassEnv().reset(Rng(0))
    np.testing.assert_array_equal(s.physical[2:], 0.0)
    assert np.all(np.abs(s.physical[:2]) <= 1)


def test_pointmass_reset_mean():
    # uniform[-1, 1]: sd of the mean over 1e4 draws is 0.0058
    s = PointMassEnv().reset(Rng(1), n=10_000)
    assert abs(s.physical[:, 0].mean()) < 0.05


def test_pendulum_reset_ranges():
    s = PendulumEnv().reset(Rng(2), n=5000)
    theta, theta_dot = s.physical[:, 0], s.physical[:, 1]
    assert np.all(theta > -math.pi) and np.all(theta <= math.pi)
    assert np.all(np.abs(theta_dot) <= 1)


def test_pointmass_step_example():
    env = PointMassEnv()
    r = env.step(EnvState(np.zeros(4)), np.array([1.0, 0.0]))
    np.testing.assert_allclose(r.state.physical, [0.0025, 0.0, 0.05, 0.0], atol=1e-15)
    assert r.reward == pytest.approx(-2.01, abs=1e-12)
    np.testing.assert_array_equal(r.next_observation, r.state.physical)


def test_pointmass_clips_action():
    env = PointMassEnv()
    big = env.step(EnvState(np.zeros(4)), np.array([5.0, -7.0]))
    unit = env.step(EnvState(np.zeros(4)), np.array([1.0, -1.0]))
    np.testing.assert_array_equal(big.state.physical, unit.state.physical)
    assert big.reward == unit.reward


def test_pendulum_equilibrium():
    r = PendulumEnv().step(EnvState(np.array([0.0, 0.0])), np.array([0.0]))
    np.testing.assert_array_equal(r.state.physical, [0.0, 0.0])
    assert r.reward == 0.0


def test_pendulum_gravity_step():
    r = PendulumEnv().step(EnvState(np.array([math.pi / 2, 0.0])), np.array([0.0]))
    assert r.state.physical[1] == pytest.approx(0.75, abs=1e-12)


def test_pendulum_observation():
    env = PendulumEnv()
    np.testing.assert_allclose(env.observe(EnvState(np.array([0.0, 0.3]))), [1, 0, 0.3])
    np.testing.assert_allclose(env.observe(EnvState(np.array([math.pi, -2.0]))), [-1, 0, -2.0], atol=1e-15)


def test_wrap_angle():
    np.testing.assert_allclose(wrap_angle(np.array([math.pi, -math.pi, 3 * math.pi, 0.5])),
                               [math.pi, math.pi, math.pi, 0.5])


def test_done_after_horizon():
    env = PointMassEnv(horizon=3)
    state = env.reset(Rng(0))
    for _ in range(3):
        assert not state.done
        state = env.step(state, np.zeros(2)).state
    assert state.done and state.t == 3
    with pytest.raises(EnvDoneError):
        env.step(state, np.zeros(2))


def test_action_dimension_checked():
    with pytest.raises(ValueError):
        PointMassEnv().step(EnvState(np.zeros(4)), np.zeros(3))


def test_make_env_unknown():
    with pytest.raises(ValueError):
        make_env("hopper")


@pytest.mark.parametrize("name", ["pointmass", "pendulum"])
def test_step_pure_and_bounded(name):
    env = make_env(name)
    rng = np.random.default_rng(0)
    state = env.reset(Rng(3), n=64)
    while not state.done:
        action = rng.normal(scale=3.0, size=(64, env.action_dim))
        r1, r2 = env.step(state, action), env.step(state, action)
        np.testing.assert_array_equal(r1.state.physical, r2.state.physical)
        np.testing.assert_array_equal(r1.reward, r2.reward)
        assert np.all(r1.reward <= 0) and np.all(np.isfinite(r1.next_observation))
        if name == "pendulum":
            theta, theta_dot = r1.state.physical[:, 0], r1.state.physical[:, 1]
            assert np.all(theta > -math.pi) and np.all(theta <= math.pi)
            assert np.all(np.abs(theta_dot) <= 8)
        state = r1.state


def test_zero_reward_only_at_goal():
    env = PointMassEnv()
    at_goal = env.step(EnvState(np.array([1.0, 1.0, 0.0, 0.0])), np.zeros(2))
    assert at_goal.reward == 0.0
    assert env.step(EnvState(np.array([1.0, 1.0, 0.0, 0.0])), np.array([0.1, 0.0])).reward < 0
    assert env.step(EnvState(np.array([0.9, 1.0, 0.0, 0.0])), np.zeros(2)).reward < 0


def _max_energy_jump(dt, steps):
    env = PendulumEnv(horizon=steps, dt=dt)
    # small swing about the hanging position theta = pi
    state = EnvState(np.array([math.pi - 0.1, 0.0]))
    energies = [env.energy(state)]
    while not state.done:
        state = env.step(state, np.zeros(1)).state
        energies.append(env.energy(state))
    return np.max(np.abs(np.diff(energies)))


def test_pendulum_energy_change_is_second_order():
    coarse = _max_energy_jump(0.05, 100)
    fine = _max_energy_jump(0.025, 200)
    # second-order per-step error: halving dt quarters the jump (1/2 would be first order)
    assert coarse / fine == pytest.approx(4.0, rel=0.15)
    # per-step change ~ dt^2 (a^2 + k v^2) / 2 with k = 15, |a| <= 1.5, |v| <= sqrt(15) * 0.1
    assert coarse <= (0.5 * 1.5 ** 2 + 0.5 * 15 * 0.15) * 0.05 ** 2
