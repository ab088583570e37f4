"""Seeded random streams and the small dense kernel used across the package."""

import numpy as np


class Rng:
    """PCG64 generator bound to an explicit ``(seed, stream_id)`` pair.

    Streams with the same seed but different ids are statistically
    independent, so rollouts, minibatch draws and Fisher subsamples can each
    own a stream without perturbing one another.
    """

    def __init__(self, seed=0, stream_id=0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream_id={self.stream_id})"

    def stream(self, stream_id):
        """Sibling stream sharing this seed."""
        return Rng(self.seed, stream_id)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size)

    def choice(self, n, size, replace=True):
        return self._gen.choice(n, size=size, replace=replace)


def as_vector(x, name="vector"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def check_finite(x, name="array"):
    """Return ``x`` as float64, raising if any entry is NaN or infinite."""
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _check_same_length(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def gaussian_sample(rng, mean, std):
    """Draw ``mean + std * z`` with ``z`` standard normal from ``rng``.

    ``mean`` and ``std`` may carry a leading batch dimension as long as the
    shapes match exactly.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if mean.shape != std.shape:
        raise ValueError(f"dimension mismatch: {mean.shape} vs {std.shape}")
    if np.any(~(std > 0)):
        raise ValueError("std must be strictly positive")
    return mean + std * rng.normal(mean.shape)


def dot(a, b):
    a, b = as_vector(a, "a"), as_vector(b, "b")
    _check_same_length(a, b)
    return float(np.dot(a, b))


def axpy(alpha, x, y):
    """``alpha * x + y`` as a new vector."""
    x, y = as_vector(x, "x"), as_vector(y, "y")
    _check_same_length(x, y)
    return alpha * x + y


def matvec(M, v):
    M = np.asarray(M, dtype=np.float64)
    v = as_vector(v, "v")
    if M.ndim != 2 or M.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {M.shape} vs vector {v.shape}")
    return M @ v


def mean_and_var(samples):
    """Mean and population variance (ddof=0) of a 1-D sample."""
    x = as_vector(samples, "samples")
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    mu = float(np.mean(x))
    return mu, float(np.mean((x - mu) ** 2))
