"""What-if analysis: shrink a component and see what the models predict.

Model components never overlap, so every predicted metric is an affine
function of the reduction fraction.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import model
from .model import Metric, StackLevel
from .timings import ComponentTimings, PipelineConfig, WorkloadMode

DEFAULT_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)


class OptimizationTarget(str, enum.Enum):
    PIO_COPY = "pio_copy"
    LLP_POST_ALL = "llp_post_all"
    LLP_ALL = "llp_all"
    HLP_ALL = "hlp_all"
    HLP_TX_PROG = "hlp_tx_prog"
    HLP_RX_PROG = "hlp_rx_prog"
    PCIE = "pcie"
    RC_TO_MEM = "rc_to_mem"
    IO_ALL = "io_all"
    WIRE = "wire"
    SWITCH = "switch"
    NETWORK_ALL = "network_all"


_LLP_POST = ("md_setup", "barrier_md", "barrier_dbc", "pio_copy", "misc_llp_post")
_HLP_RX = ("rx_cb_mpi", "rx_cb_proto", "rx_post_progress_mpi")
_HLP = ("isend_mpi_layer", "isend_proto_layer", "tx_prog") + _HLP_RX

# section -> fields scaled; "rc_to_mem" scales the whole table, "llp_prog" is top level
TARGET_FIELDS: Dict[OptimizationTarget, Dict[str, Tuple[str, ...]]] = {
    OptimizationTarget.PIO_COPY: {"llp_post": ("pio_copy",)},
    OptimizationTarget.LLP_POST_ALL: {"llp_post": _LLP_POST},
    OptimizationTarget.LLP_ALL: {"llp_post": _LLP_POST, "top": ("llp_prog",)},
    OptimizationTarget.HLP_ALL: {"hlp": _HLP},
    OptimizationTarget.HLP_TX_PROG: {"hlp": ("tx_prog",)},
    OptimizationTarget.HLP_RX_PROG: {"hlp": _HLP_RX},
    OptimizationTarget.PCIE: {"io_net": ("pcie",)},
    OptimizationTarget.RC_TO_MEM: {"io_net": ("rc_to_mem",)},
    OptimizationTarget.IO_ALL: {"io_net": ("pcie", "rc_to_mem")},
    OptimizationTarget.WIRE: {"io_net": ("wire",)},
    OptimizationTarget.SWITCH: {"io_net": ("switch",)},
    OptimizationTarget.NETWORK_ALL: {"io_net": ("wire", "switch")},
}


def apply_reduction(t: ComponentTimings, target: OptimizationTarget, fraction: float) -> ComponentTimings:
    """Copy of ``t`` with every field of ``target`` scaled by ``1 - fraction``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"reduction fraction must be in [0, 1], got {fraction}")
    keep = 1.0 - fraction
    changes = {}
    for section, names in TARGET_FIELDS[OptimizationTarget(target)].items():
        if section == "top":
            changes.update({name: getattr(t, name) * keep for name in names})
            continue
        obj = getattr(t, section)
        scaled = {}
        for name in names:
            if name == "rc_to_mem":
                scaled[name] = {size: v * keep for size, v in obj.rc_to_mem.items()}
            else:
                scaled[name] = getattr(obj, name) * keep
        changes[section] = dataclasses.replace(obj, **scaled)
    return dataclasses.replace(t, **changes)


def evaluate(t: ComponentTimings, metric: Metric, level: StackLevel, msg_size: int = 8) -> float:
    if Metric(metric) is Metric.INJECTION:
        return model.inj_overhead(t, level)
    return model.latency(t, level, msg_size)


@dataclass(frozen=True)
class WhatIfPoint:
    target: OptimizationTarget
    reduction_fraction: float
    metric: Metric
    level: StackLevel
    baseline: float
    optimized: float
    simulated: Optional[float] = None

    @property
    def speedup_ratio(self) -> float:
        if self.optimized == 0:
            return float("inf") if self.baseline > 0 else 1.0
        return self.baseline / self.optimized

    @property
    def percent_reduction(self) -> float:
        if self.baseline == 0:
            return 0.0
        return 100.0 * (self.baseline - self.optimized) / self.baseline


# pipeline settings whose steady state matches the injection model exactly
SIM_PIPELINES = {
    StackLevel.LLP_ONLY: PipelineConfig(poll_interval_p=16, poll_batch_b=1, txq_depth=64, unsignaled_interval_c=1),
    StackLevel.FULL_STACK: PipelineConfig(
        poll_interval_p=64, txq_depth=128, unsignaled_interval_c=64, workload_mode=WorkloadMode.MPI_WINDOW,
    ),
}


def simulate_metric(t: ComponentTimings, metric: Metric, level: StackLevel, msg_size: int = 8,
                    n_messages: int = 4096) -> float:
    """Re-derive a metric by running the event simulator instead of the formulas."""
    from . import simulator

    level = StackLevel(level)
    if Metric(metric) is Metric.LATENCY:
        cfg = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG, message_size_bytes=msg_size)
        return simulator.simulate_pingpong(t, cfg, 4, level).mean_latency()
    cfg = SIM_PIPELINES[level]
    period = math.lcm(cfg.poll_interval_p, cfg.unsignaled_interval_c)
    return simulator.simulate_injection(t, cfg, n_messages).steady_state_interarrival(period=period)


def sweep(
    t: ComponentTimings,
    targets: Iterable[OptimizationTarget],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    metric: Metric = Metric.INJECTION,
    level: StackLevel = StackLevel.FULL_STACK,
    msg_size: int = 8,
    confirm_with_simulator: bool = False,
) -> List[WhatIfPoint]:
    """Every (target, fraction) combination, in target-major order."""
    metric, level = Metric(metric), StackLevel(level)
    baseline = evaluate(t, metric, level, msg_size)
    points = []
    for target, fraction in itertools.product([OptimizationTarget(x) for x in targets], fractions):
        reduced = apply_reduction(t, target, fraction)
        simulated = simulate_metric(reduced, metric, level, msg_size) if confirm_with_simulator else None
        points.append(WhatIfPoint(target, fraction, metric, level, baseline,
                                  evaluate(reduced, metric, level, msg_size), simulated))
    return points


SWEEP_HEADER = ("target", "fraction", "metric", "level", "baseline_ns", "optimized_ns",
                "speedup_ratio", "percent_reduction")


def sweep_csv(points: Iterable[WhatIfPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for p in points:
        writer.writerow([p.target.value, p.reduction_fraction, p.metric.value, p.level.value,
                         f"{p.baseline:.6f}", f"{p.optimized:.6f}", f"{p.speedup_ratio:.6f}",
                         f"{p.percent_reduction:.6f}"])
    return buf.getvalue()


def sweep_gnuplot(points: Iterable[WhatIfPoint]) -> str:
    """One gnuplot data block per target (select with ``index N``)."""
    blocks = []
    for target, group in itertools.groupby(points, key=lambda p: p.target):
        lines = [f"# {target.value}", "# fraction speedup_ratio percent_reduction"]
        lines += [f"{p.reduction_fraction} {p.speedup_ratio:.6f} {p.percent_reduction:.6f}" for p in group]
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"
