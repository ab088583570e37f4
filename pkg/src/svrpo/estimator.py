"""scikit-learn style wrapper around :func:`svrpo.trustopt.train`.

The estimator learns from its own rollouts, so ``fit`` takes no data; ``X``
is accepted and ignored to keep the usual call signature. ``predict`` maps
observations to deterministic (mean) actions.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .envs import make_env
from .numkit import Rng
from .rollout import collect
from .trustopt import ALGORITHMS, ConfigError, SvrpoConfig, make_policy, train


class PolicyOptimizer(BaseEstimator):
    """Train a Gaussian MLP policy with one of the trust-region algorithms.

    Parameters mirror :class:`SvrpoConfig` under readable names.

    Attributes
    ----------
    policy_ : GaussianMlpPolicy
        Final policy.
    history_ : list of IterationRecord
    n_features_in_ : int
        Observation dimension.
    """

    def __init__(self, algorithm="svrpo", env="pointmass", n_transitions=2000, n_epochs=50,
                 n_inner=5, minibatch_size=800, fisher_ratio=0.1, gamma=0.99, delta=0.01,
                 damping=1e-5, cg_iters=10, hidden_sizes=(32, 32), normalize_advantages=True,
                 random_state=0):
        self.algorithm = algorithm
        self.env = env
        self.n_transitions = n_transitions
        self.n_epochs = n_epochs
        self.n_inner = n_inner
        self.minibatch_size = minibatch_size
        self.fisher_ratio = fisher_ratio
        self.gamma = gamma
        self.delta = delta
        self.damping = damping
        self.cg_iters = cg_iters
        self.hidden_sizes = hidden_sizes
        self.normalize_advantages = normalize_advantages
        self.random_state = random_state

    def _config(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algo", f"unknown algorithm {self.algorithm!r}")
        seed = self.random_state
        if seed is None:
            seed = 0
        elif not isinstance(seed, (int, np.integer)):
            raise ConfigError("seed", "random_state must be an int or None")
        return SvrpoConfig(
            N=self.n_transitions, L=self.n_epochs, J=self.n_inner, m=self.minibatch_size,
            nu=self.fisher_ratio, gamma=self.gamma, delta=self.delta, damping=self.damping,
            cg_iters=self.cg_iters, hidden_sizes=tuple(self.hidden_sizes),
            adv_norm=self.normalize_advantages, seed=int(seed),
        )

    def _make_env(self):
        return make_env(self.env) if isinstance(self.env, str) else self.env

    def fit(self, X=None, y=None):
        """Run training; ``X`` and ``y`` are ignored."""
        config = self._config()
        env = self._make_env()
        policy = make_policy(config, env)
        self.history_ = train(self.algorithm, config, env, policy=policy)
        if self.history_:
            policy = policy.with_params(self.history_[-1].params)
        self.policy_ = policy
        self.n_features_in_ = env.obs_dim
        return self

    def predict(self, X):
        """Mean action for each row of ``X``."""
        check_is_fitted(self, "policy_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.policy_.mean_action(X)

    def sample(self, X, random_state=None):
        """Draw stochastic actions for the rows of ``X``."""
        check_is_fitted(self, "policy_")
        X = check_array(X, dtype=np.float64)
        mean, std = self.policy_.forward(X)
        rng = np.random.default_rng(random_state)
        return mean + std * rng.standard_normal(mean.shape)

    def evaluate(self, n_episodes=20, seed=12345):
        """Mean and std of undiscounted episode returns of the fitted policy."""
        check_is_fitted(self, "policy_")
        env = self._make_env()
        trajs = collect(self.policy_, env, n_episodes * env.horizon, Rng(seed, 1))
        returns = np.array([tr.total_reward for tr in trajs])
        return float(returns.mean()), float(returns.std())

    def score(self, X=None, y=None):
        """Mean episode return over a fixed evaluation seed (higher is better)."""
        return self.evaluate()[0]
