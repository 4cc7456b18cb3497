"""Command-line entry point.

`meritmatch run` executes a manifest (config, seed, output directory, stage
subset) and writes the CSV artifacts; `meritmatch diff-regimes` summarizes an
emitted year-outcome series by admission regime.

Exit codes: 0 ok, 2 config error, 3 IO error, 4 invariant violation. Errors
print a single machine-parsable line `error: <category>: <message>`.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .core import DomainError
from .metrics import read_year_outcomes_csv
from .pipeline import ConfigError, InvariantError, RunManifest, diff_regimes, run

OUT_DIR_ENV = "MERITMATCH_OUT"

DIFF_COLUMNS = [
    "metric",
    "mean_centralized",
    "mean_decentralized",
    "difference",
    "trend_coefficient",
    "trend_p_value",
]


def _fail(category: str, exc: Exception) -> int:
    message = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
    print(f"error: {category}: {message}", file=sys.stderr)
    return {"config": 2, "io": 3, "invariant": 4}[category]


def _cmd_run(args: argparse.Namespace) -> int:
    out_dir = os.environ.get(OUT_DIR_ENV, args.out)
    try:
        manifest = RunManifest(
            config_path=args.config,
            seed=args.seed,
            seeds=args.seeds,
            out_dir=out_dir,
            stages=tuple(s.strip() for s in args.stages.split(",") if s.strip()),
            jobs=args.jobs,
            format=args.format,
        )
        artifacts = run(manifest)
    except (ConfigError, DomainError) as exc:
        return _fail("config", exc)
    except InvariantError as exc:
        return _fail("invariant", exc)
    except OSError as exc:
        return _fail("io", exc)
    for name in sorted(artifacts):
        print(f"wrote {artifacts[name]}")
    return 0


def _cmd_diff_regimes(args: argparse.Namespace) -> int:
    try:
        outcome_dicts = read_year_outcomes_csv(args.year_outcomes)
        rows = diff_regimes(outcome_dicts)
    except (ConfigError, DomainError) as exc:
        return _fail("config", exc)
    except OSError as exc:
        return _fail("io", exc)
    writer = csv.writer(sys.stdout)
    writer.writerow(DIFF_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.metric,
                repr(r.mean_centralized),
                repr(r.mean_decentralized),
                repr(r.difference),
                repr(r.trend_coefficient),
                repr(r.trend_p_value),
            ]
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meritmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate, compute metrics, and estimate")
    run_p.add_argument("--config", default=None, help="scenario config JSON (or a manifest.lock)")
    run_p.add_argument("--seed", type=int, default=0, help="first root seed")
    run_p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    run_p.add_argument("--out", default="out", help=f"output directory (env {OUT_DIR_ENV} overrides)")
    run_p.add_argument("--stages", default="simulate,metrics,estimate", help="comma list of stages")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel seed workers")
    run_p.add_argument("--format", default="csv", choices=["csv"])
    run_p.set_defaults(func=_cmd_run)

    diff_p = sub.add_parser("diff-regimes", help="regime means and trend-controlled differences")
    diff_p.add_argument("year_outcomes", help="path to an emitted year_outcomes.csv")
    diff_p.set_defaults(func=_cmd_diff_regimes)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
