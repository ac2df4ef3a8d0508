"""Command-line interface.

Subcommands: ``simulate`` (run a YAML scenario), ``correlate`` (histogram
two tag files), ``fit`` (fit a histogram CSV), ``budget`` (invert measured
rates), ``reproduce-figure`` (bundled reference scenarios).

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime,
4 acceptance-comparison failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .budget import BudgetInputs, infer_budget, write_budget_report
from .correlate import (coincidence_stats, cross_correlate, read_histogram_csv,
                        write_histogram_csv)
from .errors import InputError, OpoHeraldError, ScenarioValidationError
from .figures import DEFAULT_SEED, FIGURE_IDS, format_report, reproduce_figure
from .fitting import fit_exp_convolution
from .scenario import load_scenario, run_scenario
from .tagio import read_tags

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_COMPARISON = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    common.add_argument("--out-dir", type=Path, default=Path("."),
                        help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="worker parallelism bound")

    parser = _Parser(prog="opoherald",
                     description="pair-source / heralded-absorption simulator "
                                 "and time-tag analysis chain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario config")
    p.add_argument("config", type=Path)

    p = sub.add_parser("correlate", parents=[common],
                       help="multi-stop correlation of two tag files")
    p.add_argument("starts", type=Path)
    p.add_argument("stops", type=Path)
    p.add_argument("--bin-width-ps", type=int, required=True)
    p.add_argument("--window-ps", type=int, nargs=2, required=True,
                   metavar=("MIN", "MAX"))
    p.add_argument("--start-channel", type=int, default=None)
    p.add_argument("--stop-channel", type=int, default=None)
    p.add_argument("--peak-window-bins", type=int, nargs=2, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("fit", parents=[common], help="fit a histogram CSV")
    p.add_argument("model", choices=["exp-convolution"])
    p.add_argument("histogram", type=Path)

    p = sub.add_parser("budget", parents=[common], help="invert measured rates")
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--dt", type=float, required=True, help="bin width in seconds")
    p.add_argument("--r-abs", type=float, required=True)
    p.add_argument("--eta1", action="append", default=[], metavar="NAME=VALUE",
                   help="known arm-1 efficiency factor (repeatable)")
    p.add_argument("--known-eta2", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--beta1", type=float, default=0.0)
    p.add_argument("--pump-mw", type=float, default=None)

    p = sub.add_parser("reproduce-figure", parents=[common],
                       help="run a bundled reference scenario")
    p.add_argument("figure_id", choices=list(FIGURE_IDS))
    p.add_argument("--scale", type=float, default=None,
                   help="time scale of the figure-5 run (default 0.1)")
    return parser


def _parse_factors(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise InputError(f"expected NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        out[name] = float(value)
    return out


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.config)
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed,
                           source=replace(scenario.source, seed=args.seed))
    manifest = run_scenario(scenario, args.out_dir)
    for key, value in sorted(manifest["results"].items()):
        print(f"{key}={value}")
    print(f"manifest={Path(args.out_dir) / 'manifest.json'}")
    return EXIT_OK


def _cmd_correlate(args) -> int:
    starts = read_tags(args.starts)
    stops = read_tags(args.stops)
    t_starts = (starts.channel_times(args.start_channel)
                if args.start_channel is not None else starts.times)
    t_stops = (stops.channel_times(args.stop_channel)
               if args.stop_channel is not None else stops.times)
    total_time = max(starts.duration, stops.duration) / 1e12
    h = cross_correlate(t_starts, t_stops, args.bin_width_ps, tuple(args.window_ps),
                        total_time=total_time)
    out = args.out or (args.out_dir / "correlation.csv")
    write_histogram_csv(h, out)
    print(f"histogram={out}")
    if args.peak_window_bins:
        stats = coincidence_stats(h, tuple(args.peak_window_bins))
        lines = [f"C_per_s={stats.peak_rate_C}",
                 f"C_sigma_per_s={stats.peak_rate_sigma}",
                 f"BG_per_bin_per_s={stats.background_per_bin_rate_BG}",
                 f"snr={stats.snr}"]
        print("\n".join(lines))
        stats_path = Path(out).with_suffix(".stats.txt")
        stats_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_fit(args) -> int:
    h = read_histogram_csv(args.histogram)
    fit = fit_exp_convolution(h)
    lines = [f"tau1_ps={fit.tau1}", f"tau2_ps={fit.tau2}",
             f"amplitude={fit.amplitude}", f"offset={fit.offset}",
             f"t0_ps={fit.t0}", f"converged={fit.fit.converged}",
             f"single_exponential_fallback={fit.single_exponential_fallback}"]
    print("\n".join(lines))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    report = args.out_dir / (Path(args.histogram).stem + "_fit.txt")
    report.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_budget(args) -> int:
    inputs = BudgetInputs(R1=args.r1, R2=args.r2, C=args.c, bin_width_dt=args.dt,
                          beta1=args.beta1, eta1_factors=_parse_factors(args.eta1),
                          known_eta2_factors=_parse_factors(args.known_eta2))
    outputs = infer_budget(inputs, args.r_abs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / "budget_report.txt"
    write_budget_report(outputs, path, pump_mw=args.pump_mw)
    print(path.read_text().rstrip())
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    kwargs = {}
    if args.figure_id == "5" and args.scale is not None:
        kwargs["scale"] = args.scale
    if args.figure_id == "6" and args.threads > 1:
        kwargs["max_workers"] = args.threads
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    report = reproduce_figure(args.figure_id, args.out_dir, seed=seed, **kwargs)
    print(format_report(report))
    return EXIT_OK if report.all_passed else EXIT_COMPARISON


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"simulate": _cmd_simulate, "correlate": _cmd_correlate,
                "fit": _cmd_fit, "budget": _cmd_budget,
                "reproduce-figure": _cmd_reproduce}
    try:
        return handlers[args.command](args)
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OpoHeraldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
