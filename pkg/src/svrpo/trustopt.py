"""Trust-region Newton-CG updates and the four training loops.

* ``svrpo``: SVRG gradient, sub-sampled Fisher preconditioner, ``J`` inner
  steps per batch of rollouts.
* ``trpo``: full-batch gradient, same Fisher preconditioner, one step per batch.
* ``svrpo-sgd``: plain minibatch gradient, no preconditioner.
* ``svrpo-nofisher``: SVRG gradient, no preconditioner.

Every step goes through the same backtracking line search, which halves the
step until the surrogate improves on the full batch and the mean KL to the
sampling policy stays within ``delta``.
"""

from dataclasses import dataclass, field, fields
import math
import time

import numpy as np

from .gradients import (AnchorGradientCache, DivergenceError, NumericalError,
                        full_gradient, minibatch_gradient, surrogate_and_kl,
                        svrg_gradient, trace_covariance)
from .numkit import Rng
from .policy import GaussianMlpPolicy, PolicyArchitecture, fisher_vector_product
from .rollout import LinearBaseline, build_batch, collect, fit_baseline

# Rng stream ids; separate streams keep e.g. minibatch draws from shifting rollouts.
STREAM_INIT = 0
STREAM_ROLLOUT = 1
STREAM_MINIBATCH = 2
STREAM_FISHER = 3
STREAM_DIAGNOSTICS = 4


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class CgConfig:
    max_iters: int = 10
    residual_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("cg_iters", "must be >= 1")


@dataclass(frozen=True)
class LineSearchConfig:
    max_backtracks: int = 10
    delta: float = 0.01
    accept_ratio: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta", "must be > 0")
        if self.max_backtracks < 1:
            raise ConfigError("max_backtracks", "must be >= 1")


@dataclass(frozen=True)
class SvrpoConfig:
    """Hyperparameters shared by all four algorithms.

    ``N`` transitions per epoch, ``L`` epochs, ``J`` inner steps of minibatch
    size ``m``, Fisher subsample ratio ``nu``. The defaults are desk-scale;
    ``m * J == 2 * N`` makes two passes over the batch per epoch, which
    tuned better than one pass on held-out seeds.
    """
    N: int = 2000
    L: int = 50
    J: int = 5
    m: int = 800
    nu: float = 0.1
    gamma: float = 0.99
    delta: float = 0.01
    damping: float = 1e-5
    cg_iters: int = 10
    cg_tol: float = 1e-10
    max_backtracks: int = 10
    accept_ratio: float = 0.0
    seed: int = 0
    hidden_sizes: tuple = (32, 32)
    init_log_std: float = 0.0
    adv_norm: bool = True
    horizon: int = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        checks = [
            ("N", self.N >= 1, "must be >= 1"),
            ("L", self.L >= 0, "must be >= 0"),
            ("J", self.J >= 1, "must be >= 1"),
            ("m", 1 <= self.m <= self.N, "must satisfy 1 <= m <= N"),
            ("nu", 0 < self.nu <= 1, "must satisfy 0 < nu <= 1"),
            ("gamma", 0 < self.gamma < 1, "must lie in (0, 1)"),
            ("damping", self.damping >= 0, "must be >= 0"),
            ("cg_tol", self.cg_tol >= 0, "must be >= 0"),
            ("accept_ratio", self.accept_ratio >= 0, "must be >= 0"),
            ("hidden_sizes", len(self.hidden_sizes) > 0 and min(self.hidden_sizes) > 0,
             "must be a non-empty list of positive ints"),
            ("horizon", self.horizon is None or self.horizon >= 1, "must be >= 1"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)
        # field-specific checks live on the sub-configs
        self.cg
        self.line_search

    @property
    def cg(self):
        return CgConfig(self.cg_iters, self.cg_tol)

    @property
    def line_search(self):
        return LineSearchConfig(self.max_backtracks, self.delta, self.accept_ratio)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class StepOutcome:
    accepted: bool
    eta: float
    measured_kl: float
    surrogate_before: float
    surrogate_after: float
    backtracks: int
    policy: object = field(repr=False, default=None)


@dataclass
class IterationRecord:
    epoch: int
    env_steps: int
    mean_return: float
    std_return: float
    mean_kl: float
    accepted: int
    rejected: int
    grad_norm: float
    wall_ms: int
    steps: list = field(default_factory=list, repr=False)
    params: np.ndarray = field(default=None, repr=False)
    cg_residuals: list = field(default_factory=list, repr=False)
    variance_ratio: float = None

    CSV_HEADER = "epoch,env_steps,mean_return,std_return,mean_kl,accepted,rejected,grad_norm,wall_ms"

    def csv_row(self):
        return (f"{self.epoch},{self.env_steps},{self.mean_return!r},{self.std_return!r},"
                f"{self.mean_kl!r},{self.accepted},{self.rejected},{self.grad_norm!r},{self.wall_ms}")


# -- solver pieces --------------------------------------------------------------


def conjugate_gradient(apply_H, g, cfg=CgConfig(), full_output=False):
    """Approximately solve ``H x = g`` from ``x = 0``.

    Stops once ``||g - H x|| <= residual_tol * max(1, ||g||)`` or after
    ``cfg.max_iters`` iterations. With ``full_output`` also returns
    ``(n_iters, residual_norm)``.
    """
    g = np.asarray(g, dtype=np.float64)
    x = np.zeros_like(g)
    r = g.copy()
    p = r.copy()
    rr = float(r @ r)
    tol = cfg.residual_tol * max(1.0, math.sqrt(rr))
    it = 0
    while it < cfg.max_iters and math.sqrt(rr) > tol:
        Hp = apply_H(p)
        pHp = float(p @ Hp)
        if not (math.isfinite(pHp) and pHp > 0):
            raise NumericalError(f"conjugate gradient met curvature {pHp!r}")
        alpha = rr / pHp
        x = x + alpha * p
        r = r - alpha * Hp
        rr_new = float(r @ r)
        if not math.isfinite(rr_new):
            raise NumericalError("conjugate gradient residual became non-finite")
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    if full_output:
        return x, it, math.sqrt(rr)
    return x


def natural_step(direction, apply_H, delta):
    """Scale ``direction`` so the quadratic KL model ``0.5 s^T H s`` equals ``delta``."""
    curvature = float(direction @ apply_H(direction))
    if not (math.isfinite(curvature) and curvature > 0):
        raise NumericalError(f"non-positive curvature {curvature!r} along search direction")
    eta0 = math.sqrt(2.0 * delta / curvature)
    return eta0 * direction, eta0


def backtracking_line_search(policy, step, batch, delta, cfg=LineSearchConfig(),
                             expected_improvement=None, eta0=1.0):
    """Try ``policy.params + step / 2**k`` for ``k = 0 .. max_backtracks - 1``.

    The first candidate that strictly improves the full-batch surrogate and
    keeps the mean KL from the batch's anchor policy within ``delta`` is
    accepted. Candidates whose importance ratios overflow are rejected.
    When ``expected_improvement`` (the linear model gain of the full step)
    is given, an accepted candidate must also gain at least
    ``accept_ratio`` times its share of it.
    """
    step = np.asarray(step, dtype=np.float64)
    if not np.all(np.isfinite(step)):
        raise NumericalError("line search step is not finite")
    before, kl_before = surrogate_and_kl(policy, batch)
    frac = 1.0
    for k in range(cfg.max_backtracks):
        candidate = policy.with_params(policy.params + frac * step)
        try:
            after, kl = surrogate_and_kl(candidate, batch)
        except DivergenceError:
            frac *= 0.5
            continue
        gain_ok = (expected_improvement is None
                   or after - before >= cfg.accept_ratio * frac * expected_improvement)
        if after > before and gain_ok and kl <= delta:
            return StepOutcome(True, eta0 * frac, kl, before, after, k, candidate)
        frac *= 0.5
    return StepOutcome(False, 0.0, kl_before, before, before, cfg.max_backtracks, policy)


# -- training loops -------------------------------------------------------------

# algorithm -> (gradient estimator, use Fisher preconditioner)
ALGORITHMS = {
    "svrpo": ("svrg", True),
    "trpo": ("full", True),
    "svrpo-sgd": ("minibatch", False),
    "svrpo-nofisher": ("svrg", False),
}


def _identity(v):
    return v


def make_policy(config, env):
    arch = PolicyArchitecture(env.obs_dim, env.action_dim, config.hidden_sizes, config.init_log_std)
    return GaussianMlpPolicy(arch, rng=Rng(config.seed, STREAM_INIT))


def fisher_subsample(rng, n, nu):
    """Sorted indices of ``ceil(n * nu)`` distinct samples."""
    k = min(n, math.ceil(n * nu))
    return np.sort(rng.choice(n, size=k, replace=False))


def _estimate(kind, w, batch, cache, idx):
    if kind == "full":
        return full_gradient(w, batch)
    if kind == "minibatch":
        return minibatch_gradient(w, batch, idx)
    return svrg_gradient(w, cache, batch, idx)


def _variance_ratio(w, batch, cache, rng, m, draws=20):
    svrg, plain = [], []
    for _ in range(draws):
        idx = rng.integers(batch.size, size=m)
        svrg.append(svrg_gradient(w, cache, batch, idx).vector)
        plain.append(minibatch_gradient(w, batch, idx).vector)
    denom = trace_covariance(plain)
    return trace_covariance(svrg) / denom if denom > 0 else float("nan")


def train(algorithm, config, env, policy=None, callback=None, diagnostics=False):
    """Run ``config.L`` epochs of ``algorithm`` on ``env``.

    Parameters
    ----------
    algorithm : {"svrpo", "trpo", "svrpo-sgd", "svrpo-nofisher"}
    config : SvrpoConfig
    env : environment instance
    policy : GaussianMlpPolicy, optional
        Initial policy; by default a fresh one seeded from ``config.seed``.
    callback : callable, optional
        ``callback(epoch, trajectories)`` after each rollout phase.
    diagnostics : bool
        Also estimate the SVRG / minibatch variance ratio at each inner step
        (from a separate random stream, so the run itself is unchanged).

    Returns
    -------
    list of IterationRecord, one per epoch. ``records[-1].params`` holds the
    final policy parameters.
    """
    try:
        kind, use_fisher = ALGORITHMS[algorithm]
    except KeyError:
        raise ConfigError("algo", f"unknown algorithm {algorithm!r}") from None
    if policy is None:
        policy = make_policy(config, env)
    rollout_rng = Rng(config.seed, STREAM_ROLLOUT)
    mb_rng = Rng(config.seed, STREAM_MINIBATCH)
    fisher_rng = Rng(config.seed, STREAM_FISHER)
    diag_rng = Rng(config.seed, STREAM_DIAGNOSTICS)
    ls_cfg, cg_cfg = config.line_search, config.cg
    n_inner = 1 if kind == "full" else config.J

    baseline = LinearBaseline()
    records, env_steps = [], 0
    for epoch in range(1, config.L + 1):
        t0 = time.perf_counter()
        trajectories = collect(policy, env, config.N, rollout_rng)
        batch = build_batch(policy, trajectories, baseline, config.gamma, config.adv_norm)
        baseline = fit_baseline(trajectories, config.gamma)
        if callback is not None:
            callback(epoch, trajectories)
        env_steps += batch.size

        cache = AnchorGradientCache.build(batch, verify=False)
        w = policy
        outcomes, residuals, ratios = [], [], []
        for j in range(1, n_inner + 1):
            try:
                idx = None if kind == "full" else mb_rng.integers(batch.size, size=config.m)
                if diagnostics and kind != "full":
                    ratios.append(_variance_ratio(w, batch, cache, diag_rng, config.m))
                g = _estimate(kind, w, batch, cache, idx).vector
                if use_fisher:
                    sub = fisher_subsample(fisher_rng, batch.size, config.nu)
                    S, A = batch.observations[sub], batch.actions[sub]

                    def apply_H(v, w=w, S=S, A=A):
                        return fisher_vector_product(w, S, A, v, config.damping)

                    x, _, res = conjugate_gradient(apply_H, g, cg_cfg, full_output=True)
                    residuals.append(res)
                else:
                    apply_H, x = _identity, g
                if not np.any(g):
                    step, eta0, expected = np.zeros_like(g), 0.0, 0.0
                else:
                    step, eta0 = natural_step(x, apply_H, config.delta)
                    expected = float(g @ step)
                outcome = backtracking_line_search(w, step, batch, config.delta, ls_cfg,
                                                   expected_improvement=expected, eta0=eta0)
            except NumericalError as exc:
                raise type(exc)(f"epoch {epoch}, inner step {j}: {exc}") from exc
            outcomes.append(outcome)
            w = outcome.policy

        returns = np.array([tr.total_reward for tr in trajectories])
        n_acc = sum(o.accepted for o in outcomes)
        records.append(IterationRecord(
            epoch=epoch,
            env_steps=env_steps,
            mean_return=float(returns.mean()),
            std_return=float(returns.std()),
            mean_kl=surrogate_and_kl(w, batch)[1],
            accepted=n_acc,
            rejected=len(outcomes) - n_acc,
            grad_norm=float(np.linalg.norm(cache.full_gradient)),
            wall_ms=int(round(1000 * (time.perf_counter() - t0))),
            steps=[_strip(o) for o in outcomes],
            params=w.params,
            cg_residuals=residuals,
            variance_ratio=float(np.mean(ratios)) if ratios else None,
        ))
        policy = w
    return records


def _strip(outcome):
    # keep telemetry light: drop the policy object from stored outcomes
    return StepOutcome(outcome.accepted, outcome.eta, outcome.measured_kl,
                       outcome.surrogate_before, outcome.surrogate_after, outcome.backtracks)


def svrpo_train(config, env, **kwargs):
    return train("svrpo", config, env, **kwargs)


def trpo_train(config, env, **kwargs):
    return train("trpo", config, env, **kwargs)


def ablation_sgd_train(config, env, **kwargs):
    return train("svrpo-sgd", config, env, **kwargs)


def ablation_nofisher_train(config, env, **kwargs):
    return train("svrpo-nofisher", config, env, **kwargs)
