"""Command line entry point: ``qergodic run|validate --config cfg.json``."""

import argparse
import logging
import sys

from ..errors import ConfigError, QergodicError
from . import config as cfgmod
from .runner import WORKERS_ENV, default_workers, run

EXIT_OK, EXIT_CHECKS_FAILED, EXIT_ERROR = 0, 1, 2

CSV_COLUMNS = """\
output files: <out>/<kind>.csv and <out>/manifest.json

CSV columns per experiment kind:
  normality      nu,d_nu,time_mean,time_variance,expr4,F_nu,method,T,samples
  sweep          D,trial,max_F,n_random,n_block,min_fraction_random,
                 min_fraction_block,min_fraction_vNdef,min_fraction_strong,
                 theorem_condition,all_normal
  concentration  nu,d_nu,empirical_mean,se_mean,expected_mean,
                 empirical_variance,se_variance,exact_variance,variance_bound,trials
  entropy        t,S,S_over_klogD
  quantifier     source,trial,nu,d_nu,F_nu,expr4
  recurrence     D,t_max,step,t_star,deviation
  equilibrium    state,index,fraction_in_equilibrium
                 (+ equilibrium_observables.csv:
                  label,fraction_good_times,deviation_scale,verdict)

floats carry 17 significant digits.
exit status: 0 all checks passed, 1 a check failed, 2 configuration/runtime error.
default worker count is read from $%s.
""" % WORKERS_ENV


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qergodic",
        description="Seeded numerical experiments on normal typicality and macro-entropy.",
        epilog=CSV_COLUMNS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment", epilog=CSV_COLUMNS,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    p_run.add_argument("--config", required=True, help="path to a JSON config")
    p_run.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p_run.add_argument("--out", default=None, help="output directory (overrides out_dir)")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.ExperimentConfig.load(args.config)
        if args.command == "validate":
            errors = cfgmod.validate(cfg)
            for e in errors:
                print(e, file=sys.stderr)
            if errors:
                return EXIT_ERROR
            print("ok")
            return EXIT_OK
        workers = args.workers if args.workers is not None else default_workers()
        manifest = run(cfg, workers=workers, out_dir=args.out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (QergodicError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if manifest.passed else EXIT_CHECKS_FAILED


if __name__ == "__main__":
    sys.exit(main())
