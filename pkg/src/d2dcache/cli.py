"""Command-line entry points: run sweeps, render reports, write scenario files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import ALGORITHMS, SWEEP_VARS, ExperimentPlan, run_experiment
from .plots import render_report
from .scenario import default_scenario, load_scenario, save_scenario


def _parse_sweep(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected VAR=v1,v2,... ")
    var, _, values = text.partition("=")
    if var not in SWEEP_VARS:
        raise argparse.ArgumentTypeError(f"sweep variable must be one of {SWEEP_VARS}")
    parsed = []
    for item in values.split(","):
        item = item.strip()
        if not item:
            continue
        if var == "gamma" and item == "mean":
            parsed.append("mean")
        elif var in ("M", "N"):
            parsed.append(int(item))
        else:
            parsed.append(float(item))
    if not parsed:
        raise argparse.ArgumentTypeError("sweep needs at least one value")
    return var, parsed


def _parse_seeds(text: str) -> list[int]:
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    return list(range(int(text)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2dcache",
                                     description="auction-based D2D cache placement")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write a results CSV")
    run.add_argument("--scenario", type=Path, default=None,
                     help="scenario JSON (defaults apply when omitted)")
    run.add_argument("--sweep", type=_parse_sweep, required=True,
                     metavar="VAR=v1,v2,...",
                     help=f"sweep variable: one of {', '.join(SWEEP_VARS)}"
                          " (gamma accepts floats or 'mean')")
    run.add_argument("--seeds", type=_parse_seeds, default=[0],
                     help="count (expands to 0..n-1) or comma list")
    run.add_argument("--algos", default="mrac",
                     help=f"comma list from {', '.join(ALGORITHMS)}")
    run.add_argument("--out", type=Path, required=True, help="results CSV path")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--dump-instances", type=Path, default=None,
                     help="directory for solver instance dumps (moac/exact)")
    run.add_argument("--figures", action="store_true",
                     help="also render report figures next to the CSV")

    report = sub.add_parser("report", help="render figures from a results CSV")
    report.add_argument("--results", type=Path, required=True)
    report.add_argument("--out-dir", type=Path, default=None,
                        help="figure directory (default: alongside the CSV)")

    scenario = sub.add_parser("scenario", help="write a scenario file with defaults")
    scenario.add_argument("--out", type=Path, required=True)
    scenario.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "scenario":
        save_scenario(default_scenario(seed=args.seed), args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "report":
        written = render_report(args.results, args.out_dir)
        for path in written:
            print(f"wrote {path}")
        return 0 if written else 1

    scenario = load_scenario(args.scenario) if args.scenario else default_scenario()
    var, values = args.sweep
    plan = ExperimentPlan(
        scenario=scenario,
        sweep_var=var,
        sweep_values=values,
        seeds=args.seeds,
        algorithms=[a.strip() for a in args.algos.split(",") if a.strip()],
        out_path=args.out,
        workers=args.workers,
        dump_dir=args.dump_instances,
    )
    out, n_errors = run_experiment(plan)
    print(f"wrote {out} ({n_errors} errored cells)")
    if args.figures:
        for path in render_report(out):
            print(f"wrote {path}")
    return 0 if n_errors == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
