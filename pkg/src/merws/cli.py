"""Command-line entry point ``merws``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .errors import ConfigInvalid, MerwsError
from .harness import ExperimentConfig


def _common(parser: argparse.ArgumentParser, steps: int, trajectories: int) -> None:
    parser.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    parser.add_argument("--dim", type=int, help="dimension d (default 2)")
    parser.add_argument("--p", type=float, help="probability of repeating the remembered step")
    parser.add_argument("--r", type=float, help="probability of a stop")
    parser.add_argument("--regime", choices=["diffusive", "critical", "superdiffusive"],
                        help="solve p against the critical value instead of using --p")
    parser.add_argument("--steps", type=int, default=None, help=f"horizon n (default {steps})")
    parser.add_argument("--trajectories", type=int, default=None, help=f"ensemble size (default {trajectories})")
    parser.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (falls back to MERWS_SEED, then 0)")
    parser.add_argument("--checkpoints", help="comma-separated checkpoint times")
    parser.add_argument("--ratio", type=float, help="geometric checkpoint ratio (default 10**0.25)")
    parser.add_argument("--out", help="output directory (default merws-out)")
    parser.add_argument("--format", help="comma-separated output formats: csv,json")
    parser.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    parser.set_defaults(default_steps=steps, default_trajectories=trajectories)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="merws", description="Elephant random walk with stops: simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--experiment", choices=harness.EXPERIMENTS, default=None)
    _common(p_run, 1000, 1000)

    p_all = sub.add_parser("verify-all", help="run the acceptance suite")
    p_all.add_argument("--seed", type=lambda s: int(s, 0))
    p_all.add_argument("--workers", type=int, default=1)
    p_all.add_argument("--out", default="merws-verify")
    p_all.add_argument("--quick", action="store_true", help="tiny budget, for wiring checks only")

    for name, steps, traj in (("oracle", 10**4, 1), ("enumerate", 4, 1), ("ml-table", 1, 1),
                              ("coefftable", 10**4, 1)):
        _common(sub.add_parser(name, help=f"shortcut for run --experiment {name}"), steps, traj)

    p_sample = sub.add_parser("ml-sample", help="print Mittag-Leffler draws, one per line")
    p_sample.add_argument("--alpha", type=float, help="index in (0, 1); defaults to b = 1 - r")
    _common(p_sample, 1, 1000)
    return parser


def config_from_args(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        try:
            base = ExperimentConfig.from_json(Path(args.config).read_text()).to_dict()
        except OSError as exc:
            raise ConfigInvalid("config", str(exc)) from exc
    overrides = {
        "d": args.dim, "p": args.p, "r": args.r, "regime": args.regime,
        "n_steps": args.steps, "n_traj": args.trajectories, "seed": args.seed,
        "ratio": args.ratio, "out_dir": args.out, "workers": args.workers,
    }
    if args.checkpoints:
        try:
            overrides["checkpoints"] = [int(c) for c in args.checkpoints.split(",") if c.strip()]
        except ValueError as exc:
            raise ConfigInvalid("checkpoints", "expected comma-separated integers") from exc
    if args.format:
        overrides["formats"] = [f.strip() for f in args.format.split(",") if f.strip()]
    base.update({k: v for k, v in overrides.items() if v is not None})
    base.setdefault("n_steps", args.default_steps)
    base.setdefault("n_traj", args.default_trajectories)
    if "seed" not in base:
        base["seed"] = harness.env_seed()
    base["experiment"] = experiment if experiment != "run" else base.get("experiment", "simulate")
    return ExperimentConfig.from_dict(base).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-all":
            seed = args.seed if args.seed is not None else harness.env_seed()
            sizes = harness.SMOKE_SUITE if args.quick else harness.FULL_SUITE
            result = harness.verify_all(seed, args.workers, sizes, args.out,
                                        progress=lambda m: print(f"-- {m}", file=sys.stderr))
            for key, group in result.criteria.items():
                for rep in group:
                    print(f"criterion {key}: {rep.line()}")
            print(f"report written to {Path(args.out) / 'report.json'}")
            return result.status
        if args.command == "ml-sample":
            config = config_from_args(args, "ml-table")
            alpha = args.alpha if args.alpha is not None else config.params().b
            for x in harness.ml_samples(alpha, config.n_traj, config.seed):
                print(harness.fmt_real(x))
            return 0
        if args.command == "run" and args.experiment is not None:
            args.command = args.experiment
        config = config_from_args(args, args.command)
        result = harness.run(config)
        for rep in result.reports:
            print(rep.line())
        for kind, path in sorted(result.paths.items()):
            print(f"{kind}: {path}")
        return result.status
    except ConfigInvalid as exc:
        print(f"merws: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except MerwsError as exc:
        print(f"merws: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
