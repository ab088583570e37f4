import numpy as np
import pytest

from svrpo.numkit import Rng
from svrpo.policy import GaussianMlpPolicy, PolicyArchitecture
from svrpo.rollout import SurrogateBatch


def random_policy(seed, obs_dim=2, action_dim=2, hidden=(4,), log_std_scale=0.3):
    """Tiny policy with non-trivial biases and log-stds."""
    rng = np.random.default_rng(seed)
    arch = PolicyArchitecture(obs_dim, action_dim, hidden)
    return GaussianMlpPolicy(arch, rng.normal(scale=0.5, size=arch.n_params)
                             * np.r_[np.ones(arch.n_params - action_dim),
                                     np.full(action_dim, log_std_scale / 0.5)])


def make_batch(policy, n, seed, anchor=None):
    """Synthetic surrogate batch sampled from ``anchor`` (default ``policy``)."""
    anchor = anchor or policy
    rng = np.random.default_rng(seed)
    obs = rng.normal(size=(n, anchor.arch.obs_dim))
    mean, std = anchor.forward(obs)
    act = mean + std * rng.normal(size=mean.shape)
    adv = rng.normal(size=n)

    def frozen(a):
        a = np.array(a, dtype=float)
        a.flags.writeable = False
        return a

    return SurrogateBatch(anchor, frozen(obs), frozen(act), frozen(adv),
                          frozen(anchor.log_prob(obs, act)), frozen(anchor.mean_action(obs)),
                          frozen(np.zeros(n)))


@pytest.fixture
def tiny_policy():
    return random_policy(0)


@pytest.fixture
def tiny_batch(tiny_policy):
    return make_batch(tiny_policy, 50, seed=1)


@pytest.fixture
def rng():
    return Rng(42)


# acceptance criterion -> (passed, detail); printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
