import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from svrpo.estimator import PolicyOptimizer
from svrpo.trustopt import ConfigError, SvrpoConfig, train
from svrpo.envs import make_env

SMALL = dict(n_transitions=400, n_epochs=2, n_inner=2, minibatch_size=200, hidden_sizes=(8,))


def test_params_roundtrip():
    est = PolicyOptimizer(algorithm="trpo", delta=0.02)
    params = est.get_params()
    assert params["algorithm"] == "trpo" and params["delta"] == 0.02
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(n_epochs=3)
    assert est.n_epochs == 3


def test_defaults_match_config():
    c = PolicyOptimizer()._config()
    assert c == SvrpoConfig()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PolicyOptimizer().predict(np.zeros((1, 4)))


def test_fit_predict_shapes():
    est = PolicyOptimizer(env="pendulum", **SMALL).fit()
    assert len(est.history_) == 2 and est.n_features_in_ == 3
    X = np.random.default_rng(0).normal(size=(7, 3))
    assert est.predict(X).shape == (7, 1)
    assert est.sample(X, random_state=1).shape == (7, 1)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        est.predict([[np.nan, 0.0, 0.0]])
    mean, std = est.evaluate(n_episodes=3)
    assert np.isfinite(mean) and std >= 0
    assert est.score() == est.evaluate()[0]


def test_fit_matches_functional_api():
    est = PolicyOptimizer(algorithm="svrpo-sgd", random_state=4, **SMALL).fit()
    config = SvrpoConfig(N=400, L=2, J=2, m=200, hidden_sizes=(8,), seed=4)
    records = train("svrpo-sgd", config, make_env("pointmass"))
    np.testing.assert_array_equal(est.policy_.params, records[-1].params)


def test_invalid_params_raise_on_fit():
    with pytest.raises(ConfigError):
        PolicyOptimizer(fisher_ratio=2.0).fit()
    with pytest.raises(ConfigError):
        PolicyOptimizer(algorithm="ppo").fit()
