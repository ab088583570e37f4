"""Rollout collection, discounted returns, the linear value baseline and the
frozen surrogate batch built from one epoch of samples."""

from dataclasses import dataclass
import json
import math

import numpy as np

from .numkit import gaussian_sample

BASELINE_RIDGE = 1e-5


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    t: int


@dataclass(frozen=True)
class Trajectory:
    observations: np.ndarray   # (T, obs_dim)
    actions: np.ndarray        # (T, action_dim)
    rewards: np.ndarray        # (T,)
    terminal: bool = True

    def __len__(self):
        return self.rewards.shape[0]

    @property
    def timesteps(self):
        return np.arange(len(self))

    def transitions(self):
        for t in range(len(self)):
            yield Transition(self.observations[t], self.actions[t], float(self.rewards[t]), t)

    @property
    def total_reward(self):
        return float(np.sum(self.rewards))


def collect(policy, env, n_transitions, rng):
    """Run whole episodes of ``policy`` until at least ``n_transitions`` steps.

    Episodes all last ``env.horizon`` steps, so ``ceil(n / horizon)`` of them
    are simulated side by side. Nothing is truncated: the total may exceed
    ``n_transitions`` by less than one horizon.
    """
    if n_transitions < env.horizon:
        raise ValueError(f"n_transitions={n_transitions} must be >= horizon={env.horizon}")
    n_episodes = math.ceil(n_transitions / env.horizon)
    state = env.reset(rng, n=n_episodes)
    obs = env.observe(state)
    obs_buf, act_buf, rew_buf = [], [], []
    while not state.done:
        mean, std = policy.forward(obs)
        action = gaussian_sample(rng, mean, std)
        result = env.step(state, action)
        obs_buf.append(obs)
        act_buf.append(action)
        rew_buf.append(result.reward)
        state, obs = result.state, result.next_observation
    O = np.stack(obs_buf, axis=1)
    A = np.stack(act_buf, axis=1)
    R = np.stack(rew_buf, axis=1)
    return [Trajectory(O[i], A[i], R[i], terminal=True) for i in range(n_episodes)]


def discounted_returns(rewards, gamma):
    """Reward-to-go ``R_t = r_t + gamma * R_{t+1}`` within one trajectory."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if isinstance(rewards, Trajectory):
        rewards = rewards.rewards
    r = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for t in range(r.shape[0] - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


class LinearBaseline:
    """Ridge regression of returns on ``[s, s*s, u, u**2, u**3, 1]`` with ``u = 0.01 t``.

    ``coefficients=None`` is the zero baseline used before any fit.
    """

    def __init__(self, coefficients=None):
        self.coefficients = None if coefficients is None else np.asarray(coefficients, dtype=np.float64)

    @staticmethod
    def features(observations, t):
        s = np.atleast_2d(np.asarray(observations, dtype=np.float64))
        u = 0.01 * np.asarray(t, dtype=np.float64).reshape(-1, 1)
        return np.hstack([s, s * s, u, u ** 2, u ** 3, np.ones_like(u)])

    def predict(self, observations, t):
        if self.coefficients is None:
            return np.zeros(np.atleast_2d(observations).shape[0])
        return self.features(observations, t) @ self.coefficients


def _stack(trajectories):
    obs = np.concatenate([tr.observations for tr in trajectories])
    act = np.concatenate([tr.actions for tr in trajectories])
    ts = np.concatenate([tr.timesteps for tr in trajectories])
    return obs, act, ts


def fit_baseline(trajectories, gamma, ridge=BASELINE_RIDGE):
    if not trajectories:
        raise ValueError("need at least one trajectory")
    obs, _, ts = _stack(trajectories)
    returns = np.concatenate([discounted_returns(tr.rewards, gamma) for tr in trajectories])
    phi = LinearBaseline.features(obs, ts)
    lhs = phi.T @ phi + ridge * np.eye(phi.shape[1])
    coef = np.linalg.solve(lhs, phi.T @ returns)
    if not np.all(np.isfinite(coef)):
        raise ArithmeticError("baseline fit produced non-finite coefficients")
    return LinearBaseline(coef)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SurrogateBatch:
    """Samples of one epoch with everything the surrogate needs, held fixed.

    ``anchor`` is the sampling policy; ``anchor_log_probs`` are its log
    densities at the recorded actions and ``anchor_means`` its mean actions.
    """
    anchor: object
    observations: np.ndarray
    actions: np.ndarray
    advantages: np.ndarray
    anchor_log_probs: np.ndarray
    anchor_means: np.ndarray
    returns: np.ndarray

    @property
    def size(self):
        return self.advantages.shape[0]

    @property
    def anchor_params(self):
        return self.anchor.params

    def __len__(self):
        return self.size


def build_batch(policy, trajectories, baseline, gamma, normalize_advantages=True):
    """Assemble the surrogate batch at the sampling policy ``policy``.

    Advantages are ``R_t - baseline(s_t, t)``; with ``normalize_advantages``
    they are then shifted and scaled to zero mean and unit std over the batch.
    """
    obs, act, ts = _stack(trajectories)
    returns = np.concatenate([discounted_returns(tr.rewards, gamma) for tr in trajectories])
    adv = returns - baseline.predict(obs, ts)
    if normalize_advantages:
        adv = adv - adv.mean()
        std = adv.std()
        if std > 0:
            adv = adv / std
    return SurrogateBatch(
        anchor=policy,
        observations=_frozen(obs),
        actions=_frozen(act),
        advantages=_frozen(adv),
        anchor_log_probs=_frozen(policy.log_prob(obs, act)),
        anchor_means=_frozen(policy.mean_action(obs)),
        returns=_frozen(returns),
    )


def dump_trajectories(path, epoch, trajectories):
    """Write one JSON object per transition."""
    with open(path, "w") as fh:
        for traj_id, tr in enumerate(trajectories):
            for tx in tr.transitions():
                fh.write(json.dumps({
                    "epoch": epoch,
                    "traj_id": traj_id,
                    "t": tx.t,
                    "obs": tx.observation.tolist(),
                    "act": tx.action.tolist(),
                    "reward": tx.reward,
                }) + "\n")
