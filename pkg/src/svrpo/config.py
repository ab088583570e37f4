"""Experiment configuration: flat ``key = value`` files plus CLI overrides."""

from dataclasses import dataclass, field, fields, replace
import typing

from .trustopt import ALGORITHMS, ConfigError, SvrpoConfig
from .envs import ENVS

# experiment-level keys that are not SvrpoConfig fields
_EXPERIMENT_KEYS = {
    "algo": str,
    "env": str,
    "seeds": "int_list",
    "out": str,
    "dump_trajectories": bool,
    "jobs": int,
}
ALIASES = {"epochs": "L", "batch": "N", "inner": "J", "mini": "m", "algorithm": "algo"}


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple = ("svrpo",)
    env: str = "pointmass"
    seeds: tuple = (0,)
    out: str = "runs"
    dump_trajectories: bool = False
    jobs: int = 1
    train: SvrpoConfig = field(default_factory=SvrpoConfig)

    def __post_init__(self):
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ConfigError("algo", f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}")
        if not self.algorithms:
            raise ConfigError("algo", "at least one algorithm is required")
        if self.env not in ENVS:
            raise ConfigError("env", f"unknown environment {self.env!r}; choose from {sorted(ENVS)}")
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if self.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")

    def run_config(self, seed):
        return replace(self.train, seed=seed)


def _field_types():
    hints = typing.get_type_hints(SvrpoConfig)
    types = {}
    for f in fields(SvrpoConfig):
        if f.name == "hidden_sizes":
            types[f.name] = "int_list"
        elif f.name == "horizon":
            types[f.name] = "optional_int"
        else:
            types[f.name] = hints[f.name]
    types.update(_EXPERIMENT_KEYS)
    return types


KEY_TYPES = _field_types()


def _convert(key, raw, kind):
    text = str(raw).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if kind is float:
            return float(text)
        if kind == "int_list":
            return tuple(int(tok) for tok in text.replace(" ", "").strip("()[]").split(",") if tok)
        if kind == "optional_int":
            return None if text.lower() in ("none", "") else int(text)
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {getattr(kind, '__name__', kind)}") from None


def canonical_key(key):
    key = key.strip().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in KEY_TYPES:
        raise ConfigError(key, "unknown configuration key")
    return key


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
            key, raw = line.split("=", 1)
            key = canonical_key(key)
            values[key] = _convert(key, raw, KEY_TYPES[key])
    return values


def parse_config(path=None, overrides=None):
    """Build an :class:`ExperimentConfig` from an optional file and overrides.

    ``overrides`` maps keys (canonical names or aliases) to raw values and
    wins over the file. Raises :class:`ConfigError` naming the offending key.
    """
    values = read_config_file(path) if path else {}
    for key, raw in (overrides or {}).items():
        key = canonical_key(key)
        values[key] = _convert(key, raw, KEY_TYPES[key]) if isinstance(raw, str) else raw
    seeds = values.pop("seeds", None)
    if seeds is None:
        seeds = (values.get("seed", 0),)
    algos = values.pop("algo", "svrpo")
    if isinstance(algos, str):
        algos = tuple(a.strip() for a in algos.split(",") if a.strip())
    exp_kwargs = {k: values.pop(k) for k in ("env", "out", "dump_trajectories", "jobs") if k in values}
    train = SvrpoConfig(**values)
    return ExperimentConfig(algorithms=tuple(algos), seeds=tuple(seeds), train=train, **exp_kwargs)
