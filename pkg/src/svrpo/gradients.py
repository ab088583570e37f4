"""Importance-weighted surrogate and its gradient estimators.

For a batch collected at the anchor policy, sample ``t`` contributes
``rho_t * A_t`` to the surrogate, with ``rho_t = pi_w(a_t|s_t) / pi_anchor(a_t|s_t)``.
Its gradient is ``rho_t * A_t * grad log pi_w(a_t|s_t)``. Advantages and
anchor log-probabilities are constants with respect to ``w``.
"""

from dataclasses import dataclass

import numpy as np

from .policy import diag_gaussian_kl, diag_gaussian_log_prob

MAX_LOG_RATIO = 30.0


class NumericalError(ArithmeticError):
    pass


class DivergenceError(NumericalError):
    """Importance ratio overflowed; the candidate parameters are too far from the anchor."""


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    n_samples_used: int
    estimator_kind: str     # "full" | "minibatch" | "svrg"

    @property
    def norm(self):
        return float(np.linalg.norm(self.vector))


def _indices(batch, indices):
    if indices is None or isinstance(indices, slice):
        return slice(None)
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("minibatch indices must be non-empty")
    if idx.min() < 0 or idx.max() >= batch.size:
        raise IndexError(f"minibatch index out of range for batch of size {batch.size}")
    return idx


def importance_ratios(policy, batch, indices=None):
    """``rho_t`` for the selected samples; exactly 1 when ``policy`` is the anchor."""
    idx = _indices(batch, indices)
    anchor_lp = batch.anchor_log_probs[idx]
    if np.array_equal(policy.params, batch.anchor_params):
        return np.ones_like(anchor_lp)
    log_ratio = policy.log_prob(batch.observations[idx], batch.actions[idx]) - anchor_lp
    return _checked_exp(log_ratio)


def _checked_exp(log_ratio):
    worst = float(np.max(log_ratio))
    if not worst <= MAX_LOG_RATIO:
        raise DivergenceError(f"log importance ratio {worst:.3g} exceeds {MAX_LOG_RATIO}")
    return np.exp(log_ratio)


def surrogate(policy, batch):
    """Mean importance-weighted advantage over the full batch."""
    rho = importance_ratios(policy, batch)
    return float(np.mean(rho * batch.advantages))


def surrogate_and_kl(policy, batch):
    """Full-batch surrogate and mean KL from the anchor, sharing one forward pass."""
    mean = policy.mean_action(batch.observations)
    log_std = policy.log_std
    lp = diag_gaussian_log_prob(batch.actions, mean, log_std)
    rho = _checked_exp(lp - batch.anchor_log_probs)
    kl = diag_gaussian_kl(batch.anchor_means, batch.anchor.log_std, mean, log_std)
    return float(np.mean(rho * batch.advantages)), float(np.mean(kl))


def _weighted_sum(policy, batch, idx, scale):
    rho = importance_ratios(policy, batch, idx)
    weights = rho * batch.advantages[idx] * scale
    return policy.weighted_score(batch.observations[idx], batch.actions[idx], weights)


def per_sample_grad(policy, batch, t):
    if not 0 <= t < batch.size:
        raise IndexError(f"sample index {t} out of range for batch of size {batch.size}")
    return _weighted_sum(policy, batch, np.array([t]), 1.0)


def per_sample_grads(policy, batch, indices=None):
    """Stacked per-sample gradients, shape ``(m, n_params)``."""
    idx = _indices(batch, indices)
    rho = importance_ratios(policy, batch, idx)
    scores = policy.score_matrix(batch.observations[idx], batch.actions[idx])
    return (rho * batch.advantages[idx])[:, None] * scores


def full_gradient(policy, batch):
    vec = _weighted_sum(policy, batch, slice(None), 1.0 / batch.size)
    return GradientEstimate(vec, batch.size, "full")


def minibatch_gradient(policy, batch, indices):
    idx = _indices(batch, indices)
    vec = _weighted_sum(policy, batch, idx, 1.0 / idx.size)
    return GradientEstimate(vec, idx.size, "minibatch")


class AnchorGradientCache:
    """Full-batch gradient at the anchor, kept for SVRG corrections.

    Anchor per-sample terms are recomputed when needed rather than stored.
    """

    def __init__(self, anchor, full_gradient_vector):
        self.anchor = anchor
        self.full_gradient = np.array(full_gradient_vector)
        self.full_gradient.flags.writeable = False

    @property
    def anchor_params(self):
        return self.anchor.params

    @classmethod
    def build(cls, batch, verify=True):
        anchor = batch.anchor
        g = full_gradient(anchor, batch).vector
        if verify:
            check = per_sample_grads(anchor, batch).mean(axis=0)
            scale = max(1.0, float(np.max(np.abs(g))))
            if not np.max(np.abs(check - g)) <= 1e-9 * scale:
                raise NumericalError("anchor gradient disagrees with mean of per-sample gradients")
        return cls(anchor, g)


def svrg_gradient(policy, cache, batch, indices):
    """``g_anchor + mean_{t in I} [grad U_t(w) - grad U_t(w_anchor)]``."""
    if not np.array_equal(cache.anchor_params, batch.anchor_params):
        raise ValueError("gradient cache was built for a different anchor")
    idx = _indices(batch, indices)
    scale = 1.0 / idx.size
    correction = (_weighted_sum(policy, batch, idx, scale)
                  - _weighted_sum(cache.anchor, batch, idx, scale))
    return GradientEstimate(cache.full_gradient + correction, idx.size, "svrg")


def trace_covariance(estimates):
    """Sum of per-coordinate variances of stacked estimates ``(draws, dim)``."""
    est = np.asarray(estimates, dtype=np.float64)
    return float(np.sum(est.var(axis=0)))
