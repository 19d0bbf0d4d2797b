"""Closed-form injection-overhead and latency models.

Two stack levels are modeled. ``LLP_ONLY`` covers the low-level transport
driven directly by a benchmark; ``FULL_STACK`` adds the MPI library and
protocol layer on both ends.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .timings import ComponentTimings

COMPLETION_SIZE_BYTES = 64


class StackLevel(str, enum.Enum):
    LLP_ONLY = "llp_only"
    FULL_STACK = "full_stack"


class Metric(str, enum.Enum):
    INJECTION = "injection"
    LATENCY = "latency"


class Granularity(str, enum.Enum):
    FINE = "fine"
    CATEGORY = "category"
    ON_NODE = "on_node"


class ModelError(ValueError):
    pass


def gen_completion(t: ComponentTimings, completion_size: int = COMPLETION_SIZE_BYTES) -> float:
    """Time from the doorbell leaving the RC until the completion is in host memory.

    PCIe and the network are crossed twice (message out, ACK back), then
    the RC writes the completion entry.
    """
    return 2 * (t.io_net.pcie + t.network_total()) + t.rc_to_mem(completion_size)


def min_poll_interval(t: ComponentTimings) -> int:
    post = t.llp_post_total()
    if post <= 0:
        raise ModelError("min_poll_interval needs a positive LLP_post total")
    return max(1, math.ceil(gen_completion(t) / post))


def _injection_terms(t: ComponentTimings, level: StackLevel) -> List[Tuple[str, float]]:
    level = StackLevel(level)
    if level is StackLevel.LLP_ONLY:
        return [
            ("LLP_post", t.llp_post_total()),
            ("LLP_prog", t.llp_prog),
            ("Misc", t.misc_inj_total()),
        ]
    # all of the send-side progress is charged to the HLP
    return [
        ("HLP_post", t.hlp_post_total()),
        ("LLP_post", t.llp_post_total()),
        ("HLP_tx_prog", t.hlp.tx_prog),
        ("Misc", t.misc.per_msg_misc_full),
    ]


def _latency_terms(t: ComponentTimings, level: StackLevel, msg_size: int) -> List[Tuple[str, float]]:
    level = StackLevel(level)
    terms = [
        ("LLP_post", t.llp_post_total()),
        ("PCIe", 2 * t.io_net.pcie),
        ("Network", t.network_total()),
        (f"RCtoMem[{msg_size}]", t.rc_to_mem(msg_size)),
        ("LLP_prog", t.llp_prog),
    ]
    if level is StackLevel.FULL_STACK:
        terms.insert(0, ("HLP_post", t.hlp_post_total()))
        terms.append(("HLP_rx_prog", t.hlp_rx_prog_total()))
    return terms


def _total(terms: Sequence[Tuple[str, float]]) -> float:
    total = 0.0
    for _, value in terms:
        total += value
    return total


def cpu_time(t: ComponentTimings, level: StackLevel = StackLevel.LLP_ONLY) -> float:
    return _total(_injection_terms(t, level))


def inj_overhead(t: ComponentTimings, level: StackLevel = StackLevel.LLP_ONLY) -> float:
    """Steady-state time between message arrivals at the NIC.

    The CPU work of the next message overlaps with the PCIe transfer of
    the previous one, so the arrival interval equals ``cpu_time``.
    """
    return cpu_time(t, level)


def msg_inj_overhead(t: ComponentTimings, level: StackLevel = StackLevel.LLP_ONLY) -> float:
    """Time for a single, isolated message to reach the NIC."""
    return cpu_time(t, level) + t.io_net.pcie


def latency(t: ComponentTimings, level: StackLevel = StackLevel.LLP_ONLY, msg_size_bytes: int = 8) -> float:
    return _total(_latency_terms(t, level, msg_size_bytes))


def relative_error(modeled: float, observed: float) -> float:
    if not observed > 0:
        raise ModelError(f"observed value must be positive, got {observed}")
    return abs(modeled - observed) / observed


# ---------------------------------------------------------------------------
# breakdown reports

@dataclass(frozen=True)
class BreakdownEntry:
    label: str
    ns: float
    percent: float


@dataclass(frozen=True)
class BreakdownReport:
    metric: Metric
    level: StackLevel
    granularity: Granularity
    entries: Tuple[BreakdownEntry, ...]
    total: float

    def as_dict(self) -> dict:
        return {e.label: e.ns for e in self.entries}

    def percent(self, label: str) -> float:
        for e in self.entries:
            if e.label == label:
                return e.percent
        raise KeyError(label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", "ns", "percent"])
        for e in self.entries:
            writer.writerow([e.label, repr(e.ns), repr(e.percent)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "metric": self.metric.value,
            "level": self.level.value,
            "granularity": self.granularity.value,
            "total_ns": self.total,
            "entries": [{"label": e.label, "ns": e.ns, "percent": e.percent} for e in self.entries],
        }, indent=2)


def _report(metric, level, granularity, terms, total=None) -> BreakdownReport:
    if total is None:
        total = _total(terms)
    entries = tuple(
        BreakdownEntry(label, value, 100.0 * value / total if total > 0 else 0.0)
        for label, value in terms
    )
    return BreakdownReport(Metric(metric), StackLevel(level), Granularity(granularity), entries, total)


_LLP_POST_STEPS = (
    ("MD setup", "md_setup"),
    ("MD barrier", "barrier_md"),
    ("DBC barrier", "barrier_dbc"),
    ("PIO copy", "pio_copy"),
    ("LLP_post misc", "misc_llp_post"),
)


def _split_llp_post(t: ComponentTimings, terms):
    out = []
    for label, value in terms:
        if label == "LLP_post":
            out.extend((step, getattr(t.llp_post, name)) for step, name in _LLP_POST_STEPS)
        else:
            out.append((label, value))
    return out


def breakdown(
    t: ComponentTimings,
    metric: Metric = Metric.LATENCY,
    level: StackLevel = StackLevel.FULL_STACK,
    granularity: Granularity = Granularity.FINE,
    msg_size_bytes: int = 8,
    split_llp_post: bool = False,
) -> BreakdownReport:
    """Split a modeled injection overhead or latency into labeled parts.

    ``fine`` lists every model term in formula order (optionally with the
    LLP_post steps itemized). ``category`` groups them into CPU, I/O and
    Network. ``on_node`` (latency only) splits the on-node time into the
    initiator and target node and leaves the network out.
    """
    metric, level, granularity = Metric(metric), StackLevel(level), Granularity(granularity)

    if metric is Metric.INJECTION:
        fine = _injection_terms(t, level)
        model_total = inj_overhead(t, level)
    else:
        fine = _latency_terms(t, level, msg_size_bytes)
        model_total = latency(t, level, msg_size_bytes)

    if granularity is Granularity.FINE:
        terms = _split_llp_post(t, fine) if split_llp_post else fine
        return _report(metric, level, granularity, terms, model_total)

    if granularity is Granularity.CATEGORY:
        groups = {"CPU": 0.0, "I/O": 0.0, "Network": 0.0}
        for label, value in fine:
            if label == "PCIe" or label.startswith("RCtoMem"):
                groups["I/O"] += value
            elif label == "Network":
                groups["Network"] += value
            else:
                groups["CPU"] += value
        return _report(metric, level, granularity, list(groups.items()))

    if metric is Metric.INJECTION:
        raise ModelError("on-node breakdown is only defined for latency")
    pcie = t.io_net.pcie
    initiator = t.llp_post_total() + pcie
    target = pcie + t.rc_to_mem(msg_size_bytes) + t.llp_prog
    if level is StackLevel.FULL_STACK:
        initiator = t.hlp_post_total() + initiator
        target = target + t.hlp_rx_prog_total()
    return _report(metric, level, granularity, [("Initiator", initiator), ("Target", target)])
