"""Command-line entry points: run experiments, verify theory, materialize shifts, report.

Exit codes: 0 success, 1 usage problem, 2 data problem, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment, theory_suite
from .data import save_dataset
from .errors import (
    DegenerateGroupError,
    DegenerateVarianceError,
    EmptyDataError,
    NumericError,
    PartitionError,
    SampleSizeError,
    SchemaError,
    ShapeError,
    UsageError,
    ValidationError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (FileNotFoundError, SchemaError, EmptyDataError, PartitionError,
                SampleSizeError, DegenerateGroupError, DegenerateVarianceError,
                ShapeError)


class _Parser(argparse.ArgumentParser):
    """Argparse with the documented usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="replace the config's seed list with this single seed")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="replace the fairness-weight grid with this single value")
    parser.add_argument("--rho", type=float, default=None,
                        help="override the perturbation-ball radius")
    parser.add_argument("--p-norm", default=None,
                        help="override the ball's norm exponent (number or 'inf')")


def build_parser() -> _Parser:
    parser = _Parser(prog="fairshift",
                     description="Fair training under distribution shift: "
                                 "experiments, theory verification, shift generation.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config", parents=[])
    run.add_argument("config", help="path to an experiment config (JSON)")
    _add_override_flags(run)

    verify = sub.add_parser("verify-theory",
                            help="run the bundled theory certification suites")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=None,
                        help="also write the suite reports as JSON here")

    gen = sub.add_parser("gen-shift", help="materialize a biased source/target split")
    gen.add_argument("config", help="experiment config (its dataset+shift sections are used)")
    _add_override_flags(gen)

    report = sub.add_parser("report", help="aggregate run records into a mean/std table")
    report.add_argument("records", help="path to a records.jsonl file")
    report.add_argument("--out", default=None, help="directory for summary.csv")
    return parser


def _apply_overrides(cfg: experiment.ExperimentConfig, args) -> experiment.ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.out is not None:
        updates["out"] = args.out
    if getattr(args, "lam", None) is not None:
        updates["lambda_grid"] = (args.lam,)
    if getattr(args, "rho", None) is not None:
        updates["rho"] = args.rho
    if getattr(args, "p_norm", None) is not None:
        updates["p_norm"] = float("inf") if args.p_norm == "inf" else float(args.p_norm)
    if not updates:
        return cfg
    fields = {name: getattr(cfg, name) for name in cfg.__dataclass_fields__}
    fields.update(updates)
    return experiment.ExperimentConfig(**fields)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(experiment.ExperimentConfig.from_json(args.config), args)
    records = experiment.run_experiment(cfg)
    diverged = sum(record["status"] != "ok" for record in records)
    print(experiment.render_summary(experiment.summarize(records)))
    if cfg.out:
        print(f"wrote {len(records)} records to {cfg.out}")
    if diverged:
        print(f"warning: {diverged} cells diverged", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = theory_suite.run_all(seed=args.seed)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {result.name}: {result.details}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "theory_report.json", "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in results], fh, indent=2)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def _cmd_gen_shift(args) -> int:
    cfg = _apply_overrides(experiment.ExperimentConfig.from_json(args.config), args)
    if not cfg.out:
        raise UsageError("gen-shift needs an output directory (config 'out' or --out)")
    seed = cfg.seeds[0]
    source, target, note = experiment.make_source_target(cfg, seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(source, out / "source.csv")
    save_dataset(target, out / "target.csv")
    with open(out / "shift.json", "w", encoding="utf-8") as fh:
        json.dump(note, fh, indent=2)
    print(f"wrote source ({source.n} rows) and target ({target.n} rows) to {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    records = experiment.load_records(args.records)
    if not records:
        raise EmptyDataError(f"no records found in {args.records}")
    rows = experiment.summarize(records)
    print(experiment.render_summary(rows))
    print("cells are percent, mean±std over seeds")
    if args.out:
        path = experiment.write_summary(rows, args.out)
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "verify-theory": _cmd_verify,
                "gen-shift": _cmd_gen_shift, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except (UsageError, ValidationError) as exc:
        print(f"fairshift: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"fairshift: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"fairshift: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
