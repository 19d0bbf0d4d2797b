"""Reproduction checks against the shipped measured timings.

Each check returns a :class:`Criterion`; :func:`run_all` runs them in
order. The ``reproduce`` CLI command and the acceptance test module both
drive this.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import model, simulator, trace, whatif
from .model import Granularity, Metric, StackLevel
from .timings import (ComponentTimings, HlpTimings, IoNetworkTimings, LlpPostBreakdown, MiscTimings,
                      PipelineConfig, WorkloadMode, default_timings, emit_config, load_timings)
from .whatif import OptimizationTarget as T

# observed values reported alongside the measurements
OBSERVED_INJ_LLP = 282.33
OBSERVED_INJ_FULL = 263.91
OBSERVED_LAT_LLP = 1190.25
OBSERVED_LAT_FULL = 1336.0


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail}"


def random_timings(rng: np.random.Generator, switch: Optional[bool] = None) -> ComponentTimings:
    """Random timings rounded to 10 ps so the simulator represents them exactly."""

    def d(lo, hi):
        return round(float(rng.uniform(lo, hi)), 2)

    return ComponentTimings(
        llp_post=LlpPostBreakdown(d(5, 60), d(2, 40), d(2, 40), d(10, 200), d(1, 30)),
        llp_prog=d(10, 150),
        misc=MiscTimings(d(1, 20), d(5, 80), d(0.5, 10)),
        hlp=HlpTimings(d(5, 50), d(0.5, 10), d(10, 100), d(10, 100), d(20, 200), d(5, 60)),
        io_net=IoNetworkTimings(
            pcie=d(40, 300), wire=d(80, 600), switch=d(0, 200), rc_to_mem={8: d(30, 400)},
            has_switch=bool(rng.integers(2)) if switch is None else switch,
        ),
    )


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def check_model_exactness(t: ComponentTimings) -> Criterion:
    got = {
        "inj_llp": model.inj_overhead(t, StackLevel.LLP_ONLY),
        "inj_full": model.inj_overhead(t, StackLevel.FULL_STACK),
        "lat_llp": model.latency(t, StackLevel.LLP_ONLY, 8),
        "lat_full": model.latency(t, StackLevel.FULL_STACK, 8),
    }
    want = {"inj_llp": 295.73, "inj_full": 264.97, "lat_llp": 1135.80, "lat_full": 1387.02}
    ok = all(_close(got[k], want[k], 0.01) for k in want)
    detail = ", ".join(f"{k}={got[k]:.2f} (want {want[k]:.2f})" for k in want)
    return Criterion(1, "model exactness", ok, detail)


def check_observed_error(t: ComponentTimings) -> Criterion:
    rows = [
        ("inj_llp", model.inj_overhead(t, StackLevel.LLP_ONLY), OBSERVED_INJ_LLP, 0.05),
        ("inj_full", model.inj_overhead(t, StackLevel.FULL_STACK), OBSERVED_INJ_FULL, 0.01),
        ("lat_llp", model.latency(t, StackLevel.LLP_ONLY), OBSERVED_LAT_LLP, 0.05),
        ("lat_full", model.latency(t, StackLevel.FULL_STACK), OBSERVED_LAT_FULL, 0.04),
    ]
    errs = [(name, model.relative_error(m, o), limit) for name, m, o, limit in rows]
    ok = all(e <= limit for _, e, limit in errs)
    return Criterion(2, "observed-error margins", ok,
                     ", ".join(f"{n}={100 * e:.2f}% (<= {100 * lim:.0f}%)" for n, e, lim in errs))


def check_breakdown_percentages(t: ComponentTimings) -> Criterion:
    cat = model.breakdown(t, Metric.LATENCY, StackLevel.FULL_STACK, Granularity.CATEGORY)
    net = cat.percent("Network")
    cpu_io = cat.percent("CPU") + cat.percent("I/O")
    node = model.breakdown(t, Metric.LATENCY, StackLevel.FULL_STACK, Granularity.ON_NODE)
    ok = (_close(net, 27.6, 0.1) and _close(cpu_io, 72.4, 0.1)
          and node.as_dict()["Target"] > node.as_dict()["Initiator"])
    return Criterion(3, "breakdown percentages", ok,
                     f"Network={net:.2f}%, CPU+I/O={cpu_io:.2f}%, "
                     f"target={node.percent('Target'):.1f}% vs initiator={node.percent('Initiator'):.1f}%")


def check_simulator_convergence(t: ComponentTimings) -> Criterion:
    cfg = PipelineConfig(poll_interval_p=16, unsignaled_interval_c=1, txq_depth=64)
    res = simulator.simulate_injection(t, cfg, 10_000)
    target = model.inj_overhead(t, StackLevel.LLP_ONLY)
    mean, steady = res.mean_interarrival(), res.steady_state_interarrival()
    pp = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG)
    lat_llp = simulator.simulate_pingpong(t, pp, 100, StackLevel.LLP_ONLY).mean_latency()
    lat_full = simulator.simulate_pingpong(t, pp, 100, StackLevel.FULL_STACK).mean_latency()
    ok = (abs(mean - target) / target <= 0.01 and abs(steady - target) / target <= 0.01
          and _close(lat_llp, model.latency(t, StackLevel.LLP_ONLY), 0.01)
          and _close(lat_full, model.latency(t, StackLevel.FULL_STACK), 0.01))
    return Criterion(4, "simulator convergence", ok,
                     f"mean inter-arrival={mean:.2f} ns, steady={steady:.2f} ns (model {target:.2f}); "
                     f"ping-pong llp={lat_llp:.2f}, full={lat_full:.2f}")


def check_overlap_invariance(t: ComponentTimings, n_messages: int = 4000) -> Criterion:
    cfg = PipelineConfig(poll_interval_p=16, unsignaled_interval_c=1, txq_depth=64)
    base = simulator.simulate_injection(t, cfg, n_messages).steady_state_interarrival()
    worst = 0.0
    for factor in (0.25, 0.5, 2.0, 4.0):
        io_net = dataclasses.replace(t.io_net, pcie=t.io_net.pcie * factor)
        scaled = simulator.simulate_injection(dataclasses.replace(t, io_net=io_net), cfg, n_messages)
        worst = max(worst, abs(scaled.steady_state_interarrival() - base) / base)
    return Criterion(5, "overlap invariance", worst < 0.005,
                     f"max change {100 * worst:.4f}% over PCIe x0.25..x4")


def estimator_round_trip(t: ComponentTimings, n_iters: int = 20) -> dict:
    """Simulate ping-pong on ``t``, trace it, and run every estimator."""
    cfg = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG)
    records = trace.parse_trace(trace.serialize_trace(
        simulator.synth_trace(simulator.simulate_pingpong(t, cfg, n_iters), cfg)))
    return {
        "pcie": trace.estimate_pcie(records),
        "network": trace.estimate_network(records),
        "rc_to_mem": trace.estimate_rc_to_mem(records, t.io_net.pcie, t.llp_post_total(), t.llp_prog, 8),
    }


def check_estimator_round_trip(seed: int = 2024, n_sets: int = 10) -> Criterion:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_sets):
        t = random_timings(rng)
        est = estimator_round_trip(t)
        truth = {"pcie": t.io_net.pcie, "network": t.network_total(), "rc_to_mem": t.rc_to_mem(8)}
        worst = max(worst, max(abs(est[k] - truth[k]) / truth[k] for k in truth))
    return Criterion(6, "estimator round trip", worst <= 0.02,
                     f"{n_sets} random timing sets, worst relative error {100 * worst:.4f}%")


def check_whatif_claims(t: ComponentTimings) -> Criterion:
    full = StackLevel.FULL_STACK

    def pct(target, fraction, metric):
        return whatif.sweep(t, [target], [fraction], metric, full)[0].percent_reduction

    switch_fraction = 1 - 30 / t.io_net.switch
    got = {
        "pio84_inj": pct(T.PIO_COPY, 0.84, Metric.INJECTION),
        "pio84_lat": pct(T.PIO_COPY, 0.84, Metric.LATENCY),
        "io50_lat": pct(T.IO_ALL, 0.5, Metric.LATENCY),
        "switch30_lat": pct(T.SWITCH, switch_fraction, Metric.LATENCY),
        "hlp20_inj": pct(T.HLP_ALL, 0.2, Metric.INJECTION),
        "llp20_inj": pct(T.LLP_ALL, 0.2, Metric.INJECTION),
    }
    ok = (got["pio84_inj"] >= 25 and got["pio84_lat"] >= 5 and got["io50_lat"] >= 15
          and _close(got["switch30_lat"], 5.45, 1.0) and _close(got["hlp20_inj"], 6.44, 1.0)
          and _close(got["llp20_inj"], 13.33, 1.0))
    return Criterion(7, "what-if claims", ok, ", ".join(f"{k}={v:.2f}%" for k, v in got.items()))


def _property_failures(seed: int, cases: int) -> List[str]:
    rng = np.random.default_rng(seed)
    failures: List[str] = []
    for i in range(cases):
        t = random_timings(rng)
        for metric in Metric:
            for level in StackLevel:
                rep = model.breakdown(t, metric, level, Granularity.FINE)
                value = whatif.evaluate(t, metric, level)
                if rep.total != value or abs(sum(e.ns for e in rep.entries) - value) > 1e-9:
                    failures.append(f"case {i}: additivity {metric.value}/{level.value}")
                for target in (T.PIO_COPY, T.IO_ALL, T.HLP_ALL, T.NETWORK_ALL):
                    pts = whatif.sweep(t, [target], [0.0, 0.3, 0.6, 0.9], metric, level)
                    pr = [p.percent_reduction for p in pts]
                    if any(b < a - 1e-9 for a, b in zip(pr, pr[1:])):
                        failures.append(f"case {i}: what-if monotonicity {target.value}")
                    y = [p.optimized for p in pts]
                    if abs((y[1] - y[0]) - (y[2] - y[1])) > 1e-7 or abs((y[3] - y[2]) - (y[2] - y[1])) > 1e-7:
                        failures.append(f"case {i}: what-if linearity {target.value}")
        bumped = dataclasses.replace(t, llp_prog=t.llp_prog + float(rng.uniform(0, 50)))
        for metric in Metric:
            for level in StackLevel:
                if whatif.evaluate(bumped, metric, level) < whatif.evaluate(t, metric, level):
                    failures.append(f"case {i}: monotonicity")
        if load_timings(emit_config(t)) != t:
            failures.append(f"case {i}: config round trip")
        cfg = PipelineConfig(poll_interval_p=int(rng.integers(1, 20)), txq_depth=int(rng.integers(20, 64)),
                             unsignaled_interval_c=int(rng.integers(1, 4)))
        a = simulator.simulate_injection(t, cfg, 60)
        b = simulator.simulate_injection(t, cfg, 60)
        if a.event_log_csv() != b.event_log_csv():
            failures.append(f"case {i}: simulator determinism")
        records = simulator.synth_trace(a, cfg)
        if trace.parse_trace(trace.serialize_trace(records)) != records:
            failures.append(f"case {i}: trace round trip")
    return failures


def check_properties(seed: int = 7, cases: int = 100) -> Criterion:
    failures = _property_failures(seed, cases)
    detail = f"{cases} random cases" + (f"; {len(failures)} failures, first: {failures[0]}" if failures else "")
    return Criterion(8, "property suites", not failures, detail)


CHECKS: List[Tuple[int, str, Callable[[ComponentTimings], Criterion]]] = [
    (1, "model exactness", check_model_exactness),
    (2, "observed-error margins", check_observed_error),
    (3, "breakdown percentages", check_breakdown_percentages),
    (4, "simulator convergence", check_simulator_convergence),
    (5, "overlap invariance", check_overlap_invariance),
    (6, "estimator round trip", lambda t: check_estimator_round_trip()),
    (7, "what-if claims", check_whatif_claims),
    (8, "property suites", lambda t: check_properties()),
]


def run_all(t: Optional[ComponentTimings] = None) -> List[Criterion]:
    t = t or default_timings()
    out = []
    for number, name, check in CHECKS:
        try:
            out.append(check(t))
        except Exception as exc:  # a crash is a failed criterion, not an aborted run
            out.append(Criterion(number, name, False, f"{type(exc).__name__}: {exc}"))
    return out
