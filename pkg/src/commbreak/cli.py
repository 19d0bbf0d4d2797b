"""Command-line front end.

Exit status: 0 success, 1 invalid arguments or values, 2 unreadable or
malformed input files, 3 a ``reproduce`` check failed.

Every flag can also be set in the config file as ``run.<name>`` (for
example ``run.level = full``); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import acceptance, model, simulator, trace, whatif
from .model import Granularity, Metric, StackLevel
from .timings import (ConfigError, WorkloadMode, default_config_path, emit_config,
                      load_pipeline, load_timings, parse_config_lines)

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_REPRODUCE = 0, 1, 2, 3

LEVELS = {"llp": StackLevel.LLP_ONLY, "full": StackLevel.FULL_STACK}
MODES = {"putbw": WorkloadMode.LLP_PUTBW, "pingpong": WorkloadMode.LLP_PINGPONG,
         "mpi-window": WorkloadMode.MPI_WINDOW}
GRANULARITIES = {"fine": Granularity.FINE, "category": Granularity.CATEGORY, "on-node": Granularity.ON_NODE}

# run.<key> defaults, used when neither the flag nor the config sets them
RUN_DEFAULTS = {
    "level": "llp",
    "metric": "latency",
    "granularity": "fine",
    "messages": "10000",
    "mode": "putbw",
    "format": "csv",
    "targets": "pio_copy,hlp_all,llp_all,io_all,switch",
    "fractions": ",".join(str(f) for f in whatif.DEFAULT_FRACTIONS),
}


class InputError(Exception):
    """A file could not be read or parsed."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        text = _read(args.config or str(default_config_path()))
        try:
            self.timings = load_timings(text)
            self.pipeline_base = load_pipeline(text)
            entries = parse_config_lines(text)
        except ConfigError as exc:
            raise InputError(f"{args.config or 'default config'}: {exc}") from None
        self.run_settings = {k[len("run."):]: v for k, (v, _) in entries.items() if k.startswith("run.")}
        unknown = set(self.run_settings) - set(RUN_DEFAULTS)
        if unknown:
            raise InputError(f"unknown run.* key(s) in config: {', '.join(sorted(unknown))}")

    def get(self, name: str) -> str:
        flag = getattr(self.args, name.replace("-", "_"), None)
        if flag is not None:
            return str(flag)
        return self.run_settings.get(name, RUN_DEFAULTS[name])

    def choice(self, name: str, table: Dict[str, object]):
        value = self.get(name)
        if value not in table:
            raise ConfigError(f"--{name} must be one of {', '.join(table)}, got {value!r}")
        return table[value]

    def metric(self) -> Metric:
        return self.choice("metric", {m.value: m for m in Metric})

    def fmt(self, allowed: Sequence[str]) -> str:
        return self.choice("format", {f: f for f in allowed})


def cmd_model(ctx: Context) -> int:
    t = ctx.timings
    values = {
        "injection_llp_ns": model.inj_overhead(t, StackLevel.LLP_ONLY),
        "injection_full_ns": model.inj_overhead(t, StackLevel.FULL_STACK),
        "latency_llp_ns": model.latency(t, StackLevel.LLP_ONLY),
        "latency_full_ns": model.latency(t, StackLevel.FULL_STACK),
    }
    if ctx.args.format == "json":
        print(json.dumps(values, indent=2))
    elif ctx.args.format == "csv":
        print("quantity,ns")
        for key, value in values.items():
            print(f"{key[:-3]},{value!r}")
    else:
        print(f"injection overhead: LLP {values['injection_llp_ns']:.2f} ns, "
              f"full stack {values['injection_full_ns']:.2f} ns")
        print(f"latency (8 B):      LLP {values['latency_llp_ns']:.2f} ns, "
              f"full stack {values['latency_full_ns']:.2f} ns")
    return EXIT_OK


def cmd_breakdown(ctx: Context) -> int:
    report = model.breakdown(
        ctx.timings, ctx.metric(), ctx.choice("level", LEVELS), ctx.choice("granularity", GRANULARITIES),
        split_llp_post=ctx.args.split_llp_post,
    )
    if ctx.fmt(["csv", "json"]) == "json":
        print(report.to_json())
    else:
        print(report.to_csv(), end="")
    return EXIT_OK


def cmd_simulate(ctx: Context) -> int:
    mode = ctx.choice("mode", MODES)
    n = int(ctx.get("messages"))
    cfg = dataclasses.replace(ctx.pipeline_base, workload_mode=mode)
    if mode is WorkloadMode.LLP_PINGPONG:
        result = simulator.simulate_pingpong(ctx.timings, cfg, n, ctx.choice("level", LEVELS))
    else:
        result = simulator.simulate_injection(ctx.timings, cfg, n)
    if ctx.args.emit_trace:
        _write(ctx.args.emit_trace, trace.serialize_trace(simulator.synth_trace(result, cfg)))
    if ctx.args.emit_events:
        _write(ctx.args.emit_events, result.event_log_csv())
    print(result.summary_json())
    return EXIT_OK


def cmd_analyze_trace(ctx: Context) -> int:
    try:
        records = trace.parse_trace(_read(ctx.args.trace))
    except trace.TraceError as exc:
        raise InputError(f"{ctx.args.trace}: {exc}") from None
    t = ctx.timings
    size = ctx.args.msg_size
    notes: List[str] = []
    io_net = t.io_net
    pcie = io_net.pcie

    def attempt(label, fn):
        try:
            return fn()
        except trace.EstimationError as exc:
            notes.append(f"# {label}: not estimated ({exc})")
            return None

    stats = attempt("injection interval", lambda: trace.injection_interval_stats(records))
    if stats is not None:
        notes.append(f"# injection interval: mean {stats.mean:.3f} ns, median {stats.median:.3f} ns, "
                     f"p25 {stats.p25:.3f}, p75 {stats.p75:.3f}, min {stats.min:.3f}, max {stats.max:.3f}, "
                     f"n={stats.count}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est_pcie = attempt("io.pcie", lambda: trace.estimate_pcie(records))
    notes.extend(f"# warning: {w.message}" for w in caught)
    if est_pcie is not None:
        pcie = est_pcie
        notes.append(f"# io.pcie estimated: {est_pcie:.3f} ns")
    changes = {"pcie": pcie}

    if ctx.args.workload == "injection":
        notes.append("# network and rc_to_mem need a ping-pong trace; kept from the input config")
        return _emit_estimate(ctx, notes, dataclasses.replace(t, io_net=dataclasses.replace(io_net, **changes)))

    switch = io_net.switch
    if ctx.args.latency_with_switch is not None and ctx.args.latency_direct is not None:
        switch = trace.estimate_switch(ctx.args.latency_with_switch, ctx.args.latency_direct)
        changes["switch"] = switch
        notes.append(f"# net.switch estimated: {switch:.3f} ns")
    network = attempt("network", lambda: trace.estimate_network(records))
    if network is not None:
        wire = network - switch if io_net.has_switch else network
        changes["wire"] = max(wire, 0.0)
        notes.append(f"# network estimated: {network:.3f} ns")
    rc = attempt(f"io.rc_to_mem.{size}", lambda: trace.estimate_rc_to_mem(
        records, pcie, t.llp_post_total(), t.llp_prog, size))
    if rc is not None:
        changes["rc_to_mem"] = {**io_net.rc_to_mem, size: rc}
        notes.append(f"# io.rc_to_mem.{size} estimated: {rc:.3f} ns")

    return _emit_estimate(ctx, notes, dataclasses.replace(t, io_net=dataclasses.replace(io_net, **changes)))


def _emit_estimate(ctx: Context, notes: List[str], estimated) -> int:
    text = "\n".join(notes) + "\n" + emit_config(estimated)
    if ctx.args.output:
        _write(ctx.args.output, text)
    else:
        print(text, end="")
    return EXIT_OK


def _split(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def cmd_whatif(ctx: Context) -> int:
    try:
        targets = [whatif.OptimizationTarget(x) for x in _split(ctx.get("targets"))]
    except ValueError as exc:
        raise ConfigError(f"--targets: {exc}") from None
    try:
        fractions = [float(x) for x in _split(ctx.get("fractions"))]
    except ValueError as exc:
        raise ConfigError(f"--fractions: {exc}") from None
    points = whatif.sweep(ctx.timings, targets, fractions, ctx.metric(), ctx.choice("level", LEVELS),
                          confirm_with_simulator=ctx.args.simulate)
    fmt = ctx.fmt(["csv", "json", "gnuplot"])
    if fmt == "gnuplot":
        print(whatif.sweep_gnuplot(points), end="")
    elif fmt == "json":
        print(json.dumps([{
            "target": p.target.value, "fraction": p.reduction_fraction, "metric": p.metric.value,
            "level": p.level.value, "baseline_ns": p.baseline, "optimized_ns": p.optimized,
            "speedup_ratio": p.speedup_ratio, "percent_reduction": p.percent_reduction,
            **({"simulated_ns": p.simulated} if p.simulated is not None else {}),
        } for p in points], indent=2))
    else:
        print(whatif.sweep_csv(points), end="")
    return EXIT_OK


def cmd_reproduce(ctx: Context) -> int:
    results = acceptance.run_all(ctx.timings)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_REPRODUCE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="timings config file (default: shipped measured values)")

    parser = argparse.ArgumentParser(prog="commbreak", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", parents=[common], help="modeled injection overhead and latency")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("breakdown", parents=[common], help="labeled breakdown of a modeled metric")
    p.add_argument("--metric")
    p.add_argument("--level")
    p.add_argument("--granularity")
    p.add_argument("--format")
    p.add_argument("--split-llp-post", action="store_true", help="itemize the LLP_post steps")
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("simulate", parents=[common], help="run the event simulator")
    p.add_argument("--mode")
    p.add_argument("--messages", type=int, help="messages (injection) or iterations (ping-pong)")
    p.add_argument("--level", help="stack level for ping-pong runs")
    p.add_argument("--emit-trace", metavar="PATH")
    p.add_argument("--emit-events", metavar="PATH")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze-trace", parents=[common], help="estimate timings from a PCIe trace")
    p.add_argument("trace")
    p.add_argument("--workload", choices=["pingpong", "injection"], default="pingpong",
                   help="what the traced benchmark was doing (default: pingpong)")
    p.add_argument("--msg-size", type=int, default=8)
    p.add_argument("--latency-with-switch", type=float)
    p.add_argument("--latency-direct", type=float)
    p.add_argument("--output", "-o", metavar="PATH")
    p.set_defaults(func=cmd_analyze_trace)

    p = sub.add_parser("whatif", parents=[common], help="sweep component reductions")
    p.add_argument("--targets")
    p.add_argument("--fractions")
    p.add_argument("--metric")
    p.add_argument("--level")
    p.add_argument("--format")
    p.add_argument("--simulate", action="store_true", help="also re-run the simulator on each point")
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("reproduce", parents=[common], help="run the reproduction checks")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(Context(args))
    except InputError as exc:
        print(f"commbreak: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, model.ModelError, trace.EstimationError, simulator.ConfigurationDeadlock,
            ValueError) as exc:
        print(f"commbreak: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
