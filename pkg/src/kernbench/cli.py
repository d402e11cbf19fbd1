"""Command line front end.

Usage errors exit with status 2 (argparse convention); pipeline errors
(invalid experiments, failed runs, malformed reports) exit with status 1.
"""

from __future__ import annotations

import argparse
import sys

from .errors import KernbenchError
from .experiment import load_experiment, validate
from .kernels import REGISTRY
from .plotting import PlotSpec, emit_plot
from .report import MachineSpec, STATISTICS, load_report, stats_table
from .submit import BACKENDS, submit

DEFAULT_METRICS = ("cycles", "time", "gflops", "flops-per-cycle", "efficiency")


def _machine(args) -> MachineSpec:
    if getattr(args, "machine", None):
        return MachineSpec.load(args.machine)
    return MachineSpec()


def _add_discard_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument(
        "--discard-first", dest="discard_first", action="store_true", default=True,
        help="drop the first repetition before statistics (default)",
    )
    group.add_argument(
        "--keep-first", dest="discard_first", action="store_false",
        help="keep the first repetition",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernbench",
        description="design, execution, and analysis of dense kernel experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an experiment file")
    p.add_argument("experiment")

    p = sub.add_parser("run", help="run an experiment locally")
    p.add_argument("experiment")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--machine", help="machine spec file")
    p.add_argument("--sampler", help="sampler executable")

    p = sub.add_parser("submit", help="run locally or write a run script")
    p.add_argument("experiment")
    p.add_argument("--backend", choices=BACKENDS, default="local")
    p.add_argument("--out", required=True, help="report path or script directory")
    p.add_argument("--machine", help="machine spec file")
    p.add_argument("--sampler", help="sampler executable")

    p = sub.add_parser("stats", help="tabulate metrics of a report")
    p.add_argument("report")
    p.add_argument("--metric", action="append", default=None,
                   help="metric name, repeatable (default: all base metrics)")
    p.add_argument("--stat", action="append", default=None, choices=STATISTICS,
                   help="statistic name, repeatable (default: all)")
    p.add_argument("--machine", help="machine spec file")
    p.add_argument("--out", help="write the table here instead of stdout")
    _add_discard_flags(p)

    p = sub.add_parser("plot", help="render a report as SVG")
    p.add_argument("reports", nargs="+")
    p.add_argument("--metric", default="time")
    p.add_argument("--stat", action="append", default=None, choices=STATISTICS,
                   help="statistic to draw, repeatable (default: median)")
    p.add_argument("--style", choices=("auto", "line", "bar"), default="auto")
    p.add_argument("--breakdown", action="store_true",
                   help="one series per call instead of the summed total")
    p.add_argument("--machine", help="machine spec file")
    p.add_argument("--out", required=True, help="SVG output path")
    _add_discard_flags(p)

    p = sub.add_parser("kernels", help="list available kernels")
    p.add_argument("--verbose", action="store_true", help="include argument lists")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--reports", default="reports", help="report store directory")
    p.add_argument("--machine", help="machine spec file")
    p.add_argument("--sampler", help="sampler executable")
    return parser


def _cmd_validate(args) -> int:
    exp = load_experiment(args.experiment)
    diags = validate(exp)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return 1
    print("valid")
    return 0


def _cmd_run(args) -> int:
    exp = load_experiment(args.experiment)
    sampler = [args.sampler] if args.sampler else None
    handle = submit(exp, "local", args.out, _machine(args), sampler)
    print(handle.report_path)
    return 0


def _cmd_submit(args) -> int:
    exp = load_experiment(args.experiment)
    sampler = [args.sampler] if args.sampler else None
    handle = submit(exp, args.backend, args.out, _machine(args), sampler)
    print(handle.report_path or handle.script_path)
    return 0


def _cmd_stats(args) -> int:
    rep = load_report(args.report)
    metrics = args.metric or list(DEFAULT_METRICS)
    stats = args.stat or list(STATISTICS)
    table = stats_table(rep, metrics, stats, args.discard_first, _machine(args))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return 0


def _cmd_plot(args) -> int:
    reports = [load_report(p) for p in args.reports]
    spec = PlotSpec(
        metric=args.metric,
        stats=tuple(args.stat or ["median"]),
        discard_first=args.discard_first,
        style=args.style,
        breakdown=args.breakdown,
        labels=tuple(args.reports),
    )
    svg, sidecar = emit_plot(reports, spec, _machine(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    with open(args.out + ".csv", "w", encoding="utf-8") as fh:
        fh.write(sidecar)
    print(args.out)
    return 0


def _cmd_kernels(args) -> int:
    for name in sorted(REGISTRY):
        sig = REGISTRY[name]
        if args.verbose:
            arglist = " ".join(a.name for a in sig.args)
            print(f"{name} ({sig.dtype}): {arglist}")
        else:
            print(name)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import DEFAULT_PORT, create_app

    sampler = [args.sampler] if args.sampler else None
    app = create_app(args.reports, _machine(args), sampler)
    uvicorn.run(app, host=args.host, port=args.port or DEFAULT_PORT)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "submit": _cmd_submit,
    "stats": _cmd_stats,
    "plot": _cmd_plot,
    "kernels": _cmd_kernels,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except KernbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
