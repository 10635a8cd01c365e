"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .scenario import ScenarioError, builtin_scenarios, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("rotorsim")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rotorsim", description="Headless multirotor simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write telemetry")
    run.add_argument("--scenario", required=True,
                     help=f"scenario JSON file or bundled name ({', '.join(builtin_scenarios())})")
    run.add_argument("--duration", type=float, help="override duration [s]")
    run.add_argument("--seed", type=int, help="override RNG seed")
    run.add_argument("--out", help="output directory (default: scenario output_dir)")
    run.add_argument("--mavlink", metavar="udp:HOST:PORT",
                     help="drive every vehicle from an external autopilot; vehicle i listens on PORT+i")
    run.add_argument("--realtime", action="store_true", help="pace the run to wall-clock time")
    run.add_argument("--parallel", action="store_true", help="step vehicles in worker threads")
    run.add_argument("--plot", nargs="?", const="svg", choices=("svg", "png", "pdf"),
                     help="also render tracking-error figures (default format svg)")

    val = sub.add_parser("validate", help="check a scenario file and print the resolved config")
    val.add_argument("--scenario", required=True)
    val.add_argument("--quiet", action="store_true", help="print nothing on success")

    plot = sub.add_parser("plot", help="tracking-error figure plus its data as CSV")
    plot.add_argument("--telemetry", required=True, nargs="+", help="telemetry CSV file(s)")
    plot.add_argument("--out", required=True, help="figure path, e.g. error.svg; data goes to error.csv")
    return p


def _cmd_run(args) -> int:
    from .runner import SimulationError, run

    try:
        scenario = load_scenario(args.scenario).with_overrides(
            duration=args.duration, seed=args.seed, output_dir=args.out, mavlink=args.mavlink
        )
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run(scenario, parallel=args.parallel, realtime=args.realtime)
    except SimulationError as exc:
        print(f"error: {exc} (partial telemetry in {scenario.output_dir})", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out = Path(summary.output_dir)
    for name, v in summary.vehicles.items():
        err = "n/a" if v["max_error"] is None else f"max {v['max_error']:.4f} m, rms {v['rms_error']:.4f} m"
        print(f"{name}: {v['rows']} rows, tracking error {err}")
    if args.plot:
        from .plotting import plot_run

        for path in plot_run(out, args.plot):
            print(f"wrote {path}")
    print(f"wrote {out / 'summary.json'} ({summary.wall_time_s:.2f} s wall)")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(json.dumps(scenario.model_dump(), indent=2))
        print(f"ok: {len(scenario.vehicles)} vehicle(s), {scenario.n_steps} steps", file=sys.stderr)
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import plot_tracking_error

    try:
        fig, data = plot_tracking_error(args.telemetry, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {fig}")
    print(f"wrote {data}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "validate": _cmd_validate, "plot": _cmd_plot}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
