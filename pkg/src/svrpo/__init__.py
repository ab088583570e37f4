"""Variance-reduced natural policy optimization with a trust region.

Four trainers share one loop: ``svrpo`` (SVRG gradient + sub-sampled Fisher
natural step), ``trpo`` (full-batch natural step), and two ablations,
``svrpo-sgd`` (plain minibatch gradient, no Fisher) and ``svrpo-nofisher``
(SVRG gradient, no Fisher).
"""

from .envs import PendulumEnv, PointMassEnv, make_env
from .gradients import DivergenceError, NumericalError
from .policy import GaussianMlpPolicy, PolicyArchitecture, load_checkpoint, save_checkpoint
from .trustopt import (ConfigError, SvrpoConfig, ablation_nofisher_train, ablation_sgd_train,
                       svrpo_train, train, trpo_train)
from .estimator import PolicyOptimizer

__all__ = [
    "ConfigError", "DivergenceError", "GaussianMlpPolicy", "NumericalError", "PendulumEnv",
    "PointMassEnv", "PolicyArchitecture", "PolicyOptimizer", "SvrpoConfig",
    "ablation_nofisher_train", "ablation_sgd_train", "load_checkpoint", "make_env",
    "save_checkpoint", "svrpo_train", "train", "trpo_train",
]
