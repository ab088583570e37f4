"""Gaussian MLP policy with hand-written backprop.

The network maps an observation to the action mean through tanh hidden
layers and a linear output layer. The per-dimension log standard deviation
is a free parameter that does not depend on the state.

All parameters live in one flat float64 vector. The layout is layer-major:
for each layer the weight matrix (row-major, shape ``(fan_in, fan_out)``),
then its bias, and ``log_std`` last.
"""

from dataclasses import dataclass
import math

import numpy as np

from .numkit import Rng, check_finite

LOG_2PI = math.log(2.0 * math.pi)
CHECKPOINT_MAGIC = "svrpo-policy v1"


class CheckpointFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyArchitecture:
    obs_dim: int
    action_dim: int
    hidden_sizes: tuple = (32, 32)
    init_log_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.obs_dim < 1 or self.action_dim < 1:
            raise ValueError("obs_dim and action_dim must be positive")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must be a non-empty list of positive ints")

    @property
    def layer_sizes(self):
        return (self.obs_dim,) + self.hidden_sizes + (self.action_dim,)

    @property
    def n_params(self):
        sizes = self.layer_sizes
        n = sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))
        return n + self.action_dim


class GaussianMlpPolicy:
    """Diagonal Gaussian policy ``N(mlp(s), exp(log_std)**2)``.

    Instances are treated as immutable: ``params`` is a read-only array and
    :meth:`with_params` returns a new policy sharing the architecture.

    Parameters
    ----------
    arch : PolicyArchitecture
    params : array-like of shape (n_params,), optional
        Flat parameter vector. If omitted, weights are drawn uniformly in
        ``[-sqrt(6 / (fan_in + fan_out)), +sqrt(...)]`` from ``rng``, biases
        are zero and ``log_std`` is ``arch.init_log_std``.
    rng : Rng, optional
        Required when ``params`` is omitted.
    """

    def __init__(self, arch, params=None, rng=None):
        self.arch = arch
        if params is None:
            if rng is None:
                raise ValueError("either params or rng is required")
            params = self._init_params(arch, rng)
        params = np.array(params, dtype=np.float64)
        if params.shape != (arch.n_params,):
            raise ValueError(f"expected {arch.n_params} parameters, got shape {params.shape}")
        check_finite(params, "policy parameters")
        params.flags.writeable = False
        self.params = params
        self._slices = self._layout(arch)

    @staticmethod
    def _layout(arch):
        slices, offset = [], 0
        sizes = arch.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset = w.stop
            b = slice(offset, offset + fan_out)
            offset = b.stop
            slices.append((w, b, (fan_in, fan_out)))
        return slices, slice(offset, offset + arch.action_dim)

    @staticmethod
    def _init_params(arch, rng):
        chunks = []
        sizes = arch.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        chunks.append(np.full(arch.action_dim, float(arch.init_log_std)))
        return np.concatenate(chunks)

    def __repr__(self):
        a = self.arch
        return (f"GaussianMlpPolicy(obs_dim={a.obs_dim}, action_dim={a.action_dim}, "
                f"hidden_sizes={a.hidden_sizes}, n_params={self.n_params})")

    @property
    def n_params(self):
        return self.params.shape[0]

    def with_params(self, params):
        return GaussianMlpPolicy(self.arch, params)

    def layers(self):
        """List of ``(W, b)`` views into the flat parameter vector."""
        layer_slices, _ = self._slices
        return [(self.params[w].reshape(shape), self.params[b]) for w, b, shape in layer_slices]

    @property
    def log_std(self):
        return self.params[self._slices[1]]

    # -- evaluation ---------------------------------------------------------

    def _check_obs(self, S):
        S = np.asarray(S, dtype=np.float64)
        single = S.ndim == 1
        S = np.atleast_2d(S)
        if S.ndim != 2 or S.shape[1] != self.arch.obs_dim:
            raise ValueError(f"observations must have {self.arch.obs_dim} columns, got shape {S.shape}")
        if not np.all(np.isfinite(S)):
            raise ValueError("observations contain non-finite values")
        return S, single

    def _check_actions(self, A, n):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if A.shape != (n, self.arch.action_dim):
            raise ValueError(f"actions must have shape ({n}, {self.arch.action_dim}), got {A.shape}")
        return A

    def _activations(self, S):
        hs = [S]
        layers = self.layers()
        h = S
        for W, b in layers[:-1]:
            h = np.tanh(h @ W + b)
            hs.append(h)
        W, b = layers[-1]
        return hs, h @ W + b

    def forward(self, s):
        """Return ``(mean, std)`` for one observation or a batch of them."""
        S, single = self._check_obs(s)
        _, mean = self._activations(S)
        std = np.exp(self.log_std)
        if single:
            return mean[0], std.copy()
        return mean, np.broadcast_to(std, mean.shape).copy()

    def mean_action(self, S):
        """Network output for a batch of observations."""
        S, _ = self._check_obs(S)
        return self._activations(S)[1]

    def log_prob(self, s, a):
        """Log density of ``a`` given ``s``; scalar for one pair, array for a batch."""
        S, single = self._check_obs(s)
        A = self._check_actions(a, S.shape[0])
        _, mean = self._activations(S)
        lp = diag_gaussian_log_prob(A, mean, self.log_std)
        return float(lp[0]) if single else lp

    # -- derivatives --------------------------------------------------------

    def _output_terms(self, S, A):
        hs, mean = self._activations(S)
        inv_var = np.exp(-2.0 * self.log_std)
        diff = A - mean
        d_mean = diff * inv_var                    # d logp / d mean
        d_log_std = diff ** 2 * inv_var - 1.0      # d logp / d log_std
        return hs, d_mean, d_log_std

    def _backprop(self, hs, delta):
        """Yield ``(h_in, delta)`` pairs from the output layer backwards."""
        layers = self.layers()
        for k in range(len(layers) - 1, -1, -1):
            yield k, hs[k], delta
            if k > 0:
                delta = (delta @ layers[k][0].T) * (1.0 - hs[k] ** 2)

    def weighted_score(self, S, A, weights):
        """``sum_t weights[t] * grad log pi(A[t] | S[t])`` as a flat vector."""
        S, _ = self._check_obs(S)
        A = self._check_actions(A, S.shape[0])
        c = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        hs, d_mean, d_log_std = self._output_terms(S, A)
        out = np.empty(self.n_params)
        layer_slices, ls = self._slices
        for k, h_in, delta in self._backprop(hs, c * d_mean):
            w, b, _ = layer_slices[k]
            out[w] = (h_in.T @ delta).ravel()
            out[b] = delta.sum(axis=0)
        out[ls] = np.sum(c * d_log_std, axis=0)
        return out

    def score_matrix(self, S, A):
        """Per-sample score vectors, shape ``(n, n_params)``."""
        S, _ = self._check_obs(S)
        A = self._check_actions(A, S.shape[0])
        n = S.shape[0]
        hs, d_mean, d_log_std = self._output_terms(S, A)
        out = np.empty((n, self.n_params))
        layer_slices, ls = self._slices
        for k, h_in, delta in self._backprop(hs, d_mean):
            w, b, _ = layer_slices[k]
            out[:, w] = np.einsum("ni,nj->nij", h_in, delta).reshape(n, -1)
            out[:, b] = delta
        out[:, ls] = d_log_std
        return out

    def grad_log_prob(self, s, a):
        """Gradient of ``log_prob(s, a)`` w.r.t. all parameters for one pair."""
        s = np.asarray(s, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("grad_log_prob takes a single observation; use score_matrix for batches")
        return self.score_matrix(s[None, :], np.atleast_1d(a)[None, :])[0]

    def score_dot(self, S, A, v):
        """Directional derivatives ``grad log pi(A[t] | S[t]) . v`` (forward mode)."""
        S, _ = self._check_obs(S)
        A = self._check_actions(A, S.shape[0])
        v = np.asarray(v, dtype=np.float64)
        layer_slices, ls = self._slices
        hs, d_mean, d_log_std = self._output_terms(S, A)
        layers = self.layers()
        dh = np.zeros_like(S)
        for k, ((W, _), (w, b, shape)) in enumerate(zip(layers, layer_slices)):
            dz = dh @ W + hs[k] @ v[w].reshape(shape) + v[b]
            dh = dz if k == len(layers) - 1 else (1.0 - hs[k + 1] ** 2) * dz
        return np.sum(d_mean * dh, axis=1) + d_log_std @ v[ls]


def diag_gaussian_log_prob(A, mean, log_std):
    z = (A - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z ** 2 - log_std - 0.5 * LOG_2PI, axis=-1)


def diag_gaussian_kl(mu1, log_std1, mu2, log_std2):
    """``KL(N(mu1, s1^2) || N(mu2, s2^2))`` summed over the last axis."""
    var1, var2 = np.exp(2.0 * log_std1), np.exp(2.0 * log_std2)
    return np.sum(log_std2 - log_std1 + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2) - 0.5, axis=-1)


def flatten(policy):
    return policy.params.copy()


def unflatten(arch, values):
    return GaussianMlpPolicy(arch, values)


def _check_compatible(p, q):
    if p.arch != q.arch:
        raise ValueError("policies have different architectures")


def kl(policy_p, policy_q, s):
    """``KL(policy_p(.|s) || policy_q(.|s))``; scalar for one state, array for a batch."""
    _check_compatible(policy_p, policy_q)
    S, single = policy_p._check_obs(s)
    _, mu1 = policy_p._activations(S)
    _, mu2 = policy_q._activations(S)
    out = diag_gaussian_kl(mu1, policy_p.log_std, mu2, policy_q.log_std)
    return float(out[0]) if single else out


def mean_kl(policy_p, policy_q, states):
    return float(np.mean(kl(policy_p, policy_q, np.atleast_2d(states))))


def fisher_vector_product(policy, states, actions, v, damping=1e-5):
    """Empirical Fisher times ``v`` plus ``damping * v``.

    The Fisher estimate is the mean outer product of the score at the given
    (state, recorded action) pairs. The product is formed matrix-free as a
    forward-mode pass followed by one weighted backward pass.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[0] == 0:
        raise ValueError("Fisher subsample must be non-empty")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (policy.n_params,):
        raise ValueError(f"v must have length {policy.n_params}, got shape {v.shape}")
    n = states.shape[0]
    proj = policy.score_dot(states, actions, v)
    return policy.weighted_score(states, actions, proj / n) + damping * v


def save_checkpoint(policy, path):
    a = policy.arch
    header = (f"{CHECKPOINT_MAGIC} obs={a.obs_dim} act={a.action_dim} "
              f"hidden={','.join(str(h) for h in a.hidden_sizes)}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for x in policy.params:
            fh.write(repr(float(x)) + "\n")


def load_checkpoint(path, init_log_std=0.0):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC + " "):
        raise CheckpointFormatError(f"{path}: missing '{CHECKPOINT_MAGIC}' header")
    fields = dict(tok.split("=", 1) for tok in lines[0].split()[2:] if "=" in tok)
    try:
        arch = PolicyArchitecture(
            obs_dim=int(fields["obs"]),
            action_dim=int(fields["act"]),
            hidden_sizes=tuple(int(h) for h in fields["hidden"].split(",")),
            init_log_std=init_log_std,
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: malformed header {lines[0]!r}") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != arch.n_params:
        raise CheckpointFormatError(
            f"{path}: expected {arch.n_params} parameter values, found {len(body)}")
    try:
        values = np.array([float(ln) for ln in body])
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: non-numeric parameter value") from exc
    return GaussianMlpPolicy(arch, values)
