"""Command-line entry point: ``run``, ``check`` and ``gen-synthetic``."""

from __future__ import annotations

import argparse
import sys
import time

from .errors import WeakGuideError


def _cmd_run(args) -> int:
    from .harness import ExperimentConfig, emit_results, run_experiment

    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.out_dir = args.out
    cfg = ExperimentConfig.from_dict(cfg.to_dict())  # re-validate overrides
    start = time.perf_counter()

    def progress(row):
        if args.verbose:
            print(f"{row.method} n_labeled={row.n_labeled} n_guidance={row.n_guidance} "
                  f"trial={row.trial} rmse={row.rmse:.4f}", file=sys.stderr)

    rows = run_experiment(cfg, progress)
    paths = emit_results(rows, cfg.out_dir)
    print(f"{len(rows)} rows in {time.perf_counter() - start:.1f}s -> {paths['results']}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_all

    results = run_all(args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _cmd_gen(args) -> int:
    from .data import gen_synthetic, save_csv

    save_csv(gen_synthetic(args.n, args.d, args.noise, args.seed), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakguide",
                                     description="Regression with weak guidance: experiments and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a learning-curve experiment from a JSON config")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--out", help="output directory (overrides out_dir)")
    run.add_argument("--seed", type=int, help="master seed (overrides seed)")
    run.add_argument("--trials", type=int, help="trial count (overrides trials)")
    run.add_argument("-v", "--verbose", action="store_true", help="print one line per result row")
    run.set_defaults(func=_cmd_run)

    check = sub.add_parser("check", help="run the numerical property suites")
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_check)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic Gaussian linear dataset as CSV")
    gen.add_argument("--n", type=int, default=500)
    gen.add_argument("--d", type=int, default=50)
    gen.add_argument("--noise", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (WeakGuideError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
