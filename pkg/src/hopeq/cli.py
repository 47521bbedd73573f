"""Command line entry point.

Subcommands: train, eval, trace, sim, compare.  Each reads an optional YAML
config (keys = ExperimentConfig fields) and accepts --key=value overrides.

Exit codes: 0 success, 2 bad config/arguments, 3 training divergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import replace

import yaml

from .experiments import (
    SYNC,
    ConfigError,
    ExperimentConfig,
    MetricsReport,
    TrainingDiverged,
    run_compare,
    run_eval,
    run_sync_redundancy_sim,
    run_trace,
    run_train,
)
from .solvers import PICARD

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

_OVERRIDE_RE = re.compile(r"^--([A-Za-z_][A-Za-z0-9_]*)=(.*)$")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file with ExperimentConfig keys")

    ap = argparse.ArgumentParser(
        prog="hopeq",
        description="Hopfield networks as deep equilibrium models: train, "
        "evaluate, and compare synchronous vs even-odd update schemes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="train one configured variant")

    p_eval = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument(
        "--baseline", help="checkpoint evaluated as sync/picard to compute speedup"
    )

    p_trace = sub.add_parser(
        "trace", parents=[common], help="export per-sample residual traces"
    )
    p_trace.add_argument("--checkpoint", required=True)
    p_trace.add_argument("--samples", help="comma-separated test sample ids")

    p_sim = sub.add_parser(
        "sim", parents=[common], help="synchronous-update 2-cycle simulator"
    )
    p_sim.add_argument("--instances", type=int, default=100)

    p_cmp = sub.add_parser(
        "compare", parents=[common], help="run the variant matrix and tabulate"
    )
    p_cmp.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p_cmp.add_argument(
        "--full", action="store_true",
        help="paper-scale run, checked against the published numbers",
    )
    return ap


def collect_overrides(extras) -> list[str]:
    overrides = []
    for item in extras:
        m = _OVERRIDE_RE.match(item)
        if not m:
            raise ConfigError(f"unrecognized argument {item!r}; overrides look like --key=value")
        overrides.append(f"{m.group(1)}={m.group(2)}")
    return overrides


def load_config(args, extras) -> ExperimentConfig:
    overrides = collect_overrides(extras)
    if getattr(args, "config", None):
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_dict({}, overrides)


def format_report(r: MetricsReport) -> str:
    line = (
        f"{r.label}: accuracy {100 * r.accuracy:.2f}% on {r.n_samples} samples, "
        f"iterations {r.mean_iters:.1f} (±{r.std_iters:.1f}), "
        f"state updates {r.update_count}, speedup {r.speedup:.2f}x vs {r.baseline}"
    )
    if r.n_unconverged:
        line += f", {r.n_unconverged} unconverged"
    return line


def main(argv=None) -> int:
    args, extras = build_parser().parse_known_args(argv)
    try:
        cfg = load_config(args, extras)
        if args.command == "train":
            ckpt, log = run_train(cfg)
            print(f"checkpoint: {ckpt}")
            print(f"train log:  {log}")
        elif args.command == "eval":
            baseline = None
            if args.baseline:
                base_cfg = replace(cfg, scheme=SYNC, solver=PICARD)
                baseline = run_eval(args.baseline, base_cfg)
            report = run_eval(args.checkpoint, cfg, baseline)
            print(format_report(report))
        elif args.command == "trace":
            sample_ids = None
            if args.samples:
                sample_ids = [int(tok) for tok in args.samples.split(",") if tok]
            path = run_trace(args.checkpoint, cfg, sample_ids)
            print(f"trace: {path}")
        elif args.command == "sim":
            report = run_sync_redundancy_sim(cfg, instances=args.instances)
            print(report.summary())
        elif args.command == "compare":
            seeds = tuple(int(tok) for tok in args.seeds.split(",") if tok)
            run_compare(cfg, seeds=seeds, full=args.full)
    except TrainingDiverged as exc:
        print(f"error (divergence): {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, yaml.YAMLError, ValueError) as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
