"""Small deterministic continuous-control tasks.

Both environments are pure functions of ``(state, action)``. States may
carry a leading batch axis so several episodes can be stepped in lockstep;
all episodes share the fixed horizon, so a batch finishes together.

Rewards are charged at the pre-step state.
"""

from dataclasses import dataclass
import math

import numpy as np


class EnvDoneError(RuntimeError):
    """Raised when stepping an episode that has already hit its horizon."""


@dataclass(frozen=True)
class EnvState:
    physical: np.ndarray    # (dim,) or (batch, dim)
    t: int = 0
    done: bool = False


@dataclass(frozen=True)
class StepResult:
    next_observation: np.ndarray
    reward: object          # float, or (batch,) array for batched states
    done: bool
    state: EnvState


def wrap_angle(theta):
    """Map angles into ``(-pi, pi]``."""
    return math.pi - np.mod(math.pi - theta, 2.0 * math.pi)


class _Env:
    name = None
    obs_dim = None
    action_dim = None

    def __init__(self, horizon=None, dt=0.05):
        self.horizon = int(horizon if horizon is not None else self.default_horizon)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        self.dt = float(dt)

    def __repr__(self):
        return f"{type(self).__name__}(horizon={self.horizon}, dt={self.dt})"

    def _check_action(self, state, action):
        action = np.asarray(action, dtype=np.float64)
        if action.shape[-1:] != (self.action_dim,) or action.shape[:-1] != state.physical.shape[:-1]:
            raise ValueError(f"action shape {action.shape} does not match state {state.physical.shape}")
        return action

    def step(self, state, action):
        if state.done:
            raise EnvDoneError("cannot step a finished episode; call reset()")
        action = self._check_action(state, action)
        physical, reward = self._dynamics(state.physical, action)
        t = state.t + 1
        done = t >= self.horizon
        nxt = EnvState(physical, t, done)
        if np.ndim(reward) == 0:
            reward = float(reward)
        return StepResult(self.observe(nxt), reward, done, nxt)


class PointMassEnv(_Env):
    """2-D point mass pushed by a bounded force towards the goal ``(1, 1)``."""

    name = "pointmass"
    obs_dim = 4
    action_dim = 2
    default_horizon = 100
    goal = np.array([1.0, 1.0])

    def reset(self, rng, n=None):
        shape = (2,) if n is None else (n, 2)
        pos = rng.uniform(-1.0, 1.0, size=shape)
        return EnvState(np.concatenate([pos, np.zeros(shape)], axis=-1))

    def observe(self, state):
        return state.physical.copy()

    def _dynamics(self, phys, action):
        a = np.clip(action, -1.0, 1.0)
        pos, vel = phys[..., :2], phys[..., 2:]
        reward = -np.sum((pos - self.goal) ** 2, axis=-1) - 0.01 * np.sum(a ** 2, axis=-1)
        vel = vel + a * self.dt
        pos = pos + vel * self.dt
        return np.concatenate([pos, vel], axis=-1), reward


class PendulumEnv(_Env):
    """Torque-limited pendulum; ``theta = 0`` is upright."""

    name = "pendulum"
    obs_dim = 3
    action_dim = 1
    default_horizon = 200
    g = 10.0
    m = 1.0
    l = 1.0
    max_speed = 8.0
    max_torque = 2.0

    def reset(self, rng, n=None):
        size = None if n is None else n
        theta = wrap_angle(rng.uniform(-math.pi, math.pi, size=size))
        theta_dot = rng.uniform(-1.0, 1.0, size=size)
        return EnvState(np.stack([theta, theta_dot], axis=-1))

    def observe(self, state):
        theta, theta_dot = state.physical[..., 0], state.physical[..., 1]
        return np.stack([np.cos(theta), np.sin(theta), theta_dot], axis=-1)

    def _dynamics(self, phys, action):
        u = np.clip(action[..., 0], -self.max_torque, self.max_torque)
        theta, theta_dot = phys[..., 0], phys[..., 1]
        reward = -(wrap_angle(theta) ** 2 + 0.1 * theta_dot ** 2 + 0.001 * u ** 2)
        accel = 3.0 * self.g / (2.0 * self.l) * np.sin(theta) + 3.0 / (self.m * self.l ** 2) * u
        theta_dot = np.clip(theta_dot + accel * self.dt, -self.max_speed, self.max_speed)
        theta = wrap_angle(theta + theta_dot * self.dt)
        return np.stack([theta, theta_dot], axis=-1), reward

    def energy(self, state):
        """Conserved quantity of the unforced, unclipped dynamics (per unit inertia)."""
        theta, theta_dot = state.physical[..., 0], state.physical[..., 1]
        return 0.5 * theta_dot ** 2 + 3.0 * self.g / (2.0 * self.l) * np.cos(theta)


ENVS = {"pointmass": PointMassEnv, "pendulum": PendulumEnv}


def make_env(name, horizon=None):
    try:
        cls = ENVS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVS)}") from None
    return cls(horizon=horizon)
