"""
Command line entry point.

    simbeam sweep     --config exp.cfg [--seed S] [--trials T] [--method M] [--out results.csv] [--plot]
    simbeam trace     --config exp.cfg [--method sr] [--out trace.csv] [--plot]
    simbeam gradcheck [--trials 100] [--seed 0]

Flags override the config file.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SOLVERS, ConfigError, load_config
from .experiment import export_traces, gradient_check, read_traces, run_experiment, solve_single, write_results

GRADCHECK_TOL = 1e-6


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in methods:
        if m not in SOLVERS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; expected one of {', '.join(SOLVERS)}")
    return methods


def build_parser():
    parser = argparse.ArgumentParser(prog="simbeam", description="SIM multiuser beamforming experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value experiment file")
    common.add_argument("--seed", type=_u64, help="base seed (unsigned 64-bit)")
    common.add_argument("--trials", type=_positive, help="Monte-Carlo trials per sweep value")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")

    sweep = sub.add_parser("sweep", parents=[common], help="run a Monte-Carlo sweep, write aggregated CSV")
    sweep.add_argument("--method", type=_methods, help="solver or comma separated list of solvers")
    sweep.add_argument("--workers", type=_positive, help="parallel worker processes")

    trace = sub.add_parser("trace", parents=[common], help="single solve, write convergence traces")
    trace.add_argument("--method", default="sr", choices=SOLVERS)

    grad = sub.add_parser("gradcheck", help="analytic gradient against central differences")
    grad.add_argument("--seed", type=_u64, default=0)
    grad.add_argument("--trials", type=_positive, default=100, help="random instances")
    return parser


def _overrides(args, **extra):
    out = {"seed": args.seed, "trials": args.trials, "output": args.out}
    out.update(extra)
    return out


def cmd_sweep(args):
    config = load_config(args.config, _overrides(args, methods=args.method, workers=args.workers))
    rows = run_experiment(config)
    write_results(rows, config.output)
    for row in rows:
        flag = f"  ({row.failed_trials} failed)" if row.failed_trials else ""
        print(f"{row.sweep_axis}={row.sweep_value:g} {row.method:>9}: "
              f"{row.mean_rate:.4f} +/- {row.stderr:.4f} bits/s/Hz{flag}")
    print(f"wrote {config.output}")
    if args.plot:
        from .plotting import figure_path, plot_sweep
        print(f"wrote {plot_sweep(rows, figure_path(config.output))}")
    return 0


def cmd_trace(args):
    out = args.out or "trace.csv"
    config = load_config(args.config, _overrides(args, output=out))
    report = solve_single(config, args.method)
    export_traces(report, out)
    print(f"{report.method}: rate {report.rate:.6f} bits/s/Hz after {report.ao_iterations} outer iterations "
          f"(seed {report.seed})")
    print(f"wrote {out}")
    if args.plot:
        from .plotting import figure_path, plot_traces
        print(f"wrote {plot_traces(read_traces(out), figure_path(out))}")
    return 0


def cmd_gradcheck(args):
    worst = gradient_check(args.trials, args.seed)
    ok = worst < GRADCHECK_TOL
    print(f"max relative error {worst:.3e} over {args.trials} instances: {'ok' if ok else 'FAIL'}")
    return 0 if ok else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"sweep": cmd_sweep, "trace": cmd_trace, "gradcheck": cmd_gradcheck}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"simbeam: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"simbeam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
