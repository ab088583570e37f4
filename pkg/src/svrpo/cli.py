"""Command-line harness: multi-seed runs, CSV telemetry and summaries.

Usage::

    svrpo train --algo svrpo,trpo --env pointmass --seeds 0,1,2 --out runs/
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .config import parse_config
from .envs import make_env
from .gradients import NumericalError
from .policy import GaussianMlpPolicy, load_checkpoint, save_checkpoint
from .rollout import dump_trajectories
from .trustopt import ConfigError, IterationRecord, make_policy, train

log = logging.getLogger("svrpo")

CSV_HEADER = IterationRecord.CSV_HEADER


def write_csv(path, records):
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def read_csv(path):
    """Load a telemetry CSV into a dict of column arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return cols


def _check_writable(out):
    os.makedirs(out, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out, prefix=".probe"):
        pass


def checkpoint(policy, path):
    save_checkpoint(policy, path)


def restore(path, init_log_std=0.0):
    return load_checkpoint(path, init_log_std)


def final_return(records, window=1):
    """Mean of ``mean_return`` over the last ``window`` epochs (None if no epochs)."""
    if not records:
        return None
    return float(np.mean([r.mean_return for r in records[-window:]]))


def area_under_curve(records):
    """Trapezoid area of ``mean_return`` against cumulative env steps."""
    if len(records) < 2:
        return None
    x = np.array([r.env_steps for r in records], dtype=float)
    y = np.array([r.mean_return for r in records])
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _run_one(exp, algo, seed):
    config = exp.run_config(seed)
    env = make_env(exp.env, config.horizon)
    stem = os.path.join(exp.out, f"{algo}_seed{seed}")
    callback = None
    if exp.dump_trajectories:
        traj_dir = stem + "_trajectories"
        os.makedirs(traj_dir, exist_ok=True)

        def callback(epoch, trajectories):
            dump_trajectories(os.path.join(traj_dir, f"epoch{epoch:04d}.jsonl"), epoch, trajectories)

    policy = make_policy(config, env)
    records = train(algo, config, env, policy=policy, callback=callback)
    write_csv(stem + ".csv", records)
    final = policy.with_params(records[-1].params) if records else policy
    checkpoint(final, stem + ".policy")
    log.info("%s seed %d: %d epochs, final return %s", algo, seed, len(records), final_return(records))
    return records


def summarize(results):
    """``results`` maps algorithm -> {seed: records}."""
    summary = {}
    for algo, by_seed in results.items():
        finals = [final_return(recs) for recs in by_seed.values()]
        aucs = [area_under_curve(recs) for recs in by_seed.values()]
        finals = [f for f in finals if f is not None]
        aucs = [a for a in aucs if a is not None]
        summary[algo] = {
            "seeds": sorted(by_seed),
            "final_returns": finals,
            "median_final_return": float(np.median(finals)) if finals else None,
            "median_auc": float(np.median(aucs)) if aucs else None,
        }
    return summary


def run_experiment(exp):
    """Run every (algorithm, seed) pair of ``exp``; write CSVs and ``summary.json``.

    Returns the summary dict. The output directory is checked for
    writability before any simulation starts.
    """
    _check_writable(exp.out)
    tasks = [(algo, seed) for algo in exp.algorithms for seed in exp.seeds]
    if exp.jobs > 1:
        with ProcessPoolExecutor(max_workers=exp.jobs) as pool:
            futures = [pool.submit(_run_one, exp, algo, seed) for algo, seed in tasks]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_run_one(exp, algo, seed) for algo, seed in tasks]
    results = {}
    for (algo, seed), records in zip(tasks, outputs):
        results.setdefault(algo, {})[seed] = records
    summary = summarize(results)
    with open(os.path.join(exp.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# -- argument parsing -------------------------------------------------------------

# flag dest -> config key
FLAG_KEYS = {
    "algo": "algo", "env": "env", "seed": "seed", "seeds": "seeds",
    "epochs": "L", "batch": "N", "inner": "J", "mini": "m", "nu": "nu",
    "delta": "delta", "gamma": "gamma", "damping": "damping",
    "cg_iters": "cg_iters", "cg_tol": "cg_tol", "max_backtracks": "max_backtracks",
    "accept_ratio": "accept_ratio", "hidden": "hidden_sizes",
    "init_log_std": "init_log_std", "horizon": "horizon", "out": "out", "jobs": "jobs",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="svrpo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    tr = sub.add_parser("train", help="run training experiments")
    tr.add_argument("--config", help="flat 'key = value' config file; flags override it")
    tr.add_argument("--algo", help="svrpo | trpo | svrpo-sgd | svrpo-nofisher (comma list allowed)")
    tr.add_argument("--env", help="pointmass | pendulum")
    tr.add_argument("--seed")
    tr.add_argument("--seeds", help="comma-separated seeds; overrides --seed")
    tr.add_argument("--epochs", metavar="L")
    tr.add_argument("--batch", metavar="N", help="transitions per epoch")
    tr.add_argument("--inner", metavar="J", help="inner minibatch steps per epoch")
    tr.add_argument("--mini", metavar="m", help="minibatch size")
    tr.add_argument("--nu", help="Fisher subsample ratio")
    tr.add_argument("--delta", help="KL trust-region radius")
    tr.add_argument("--gamma", help="discount factor")
    tr.add_argument("--damping")
    tr.add_argument("--cg-iters")
    tr.add_argument("--cg-tol")
    tr.add_argument("--max-backtracks")
    tr.add_argument("--accept-ratio")
    tr.add_argument("--hidden", help="hidden layer sizes, e.g. 64,64")
    tr.add_argument("--init-log-std")
    tr.add_argument("--horizon")
    tr.add_argument("--out")
    tr.add_argument("--jobs", help="run seeds in this many worker processes")
    tr.add_argument("--no-adv-norm", action="store_true", help="disable advantage standardization")
    tr.add_argument("--dump-trajectories", action="store_true")
    tr.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    overrides = {key: getattr(args, dest) for dest, key in FLAG_KEYS.items()
                 if getattr(args, dest) is not None}
    if args.no_adv_norm:
        overrides["adv_norm"] = False
    if args.dump_trajectories:
        overrides["dump_trajectories"] = True
    return parse_config(args.config, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        exp = config_from_args(args)
        summary = run_experiment(exp)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
