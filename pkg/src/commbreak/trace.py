"""PCIe analyzer traces and the estimators that turn them into timings.

Trace files are CSV with the header
``timestamp_ns,direction,tlp_type,payload_bytes,tag``. Directions are
seen from the root complex: ``down`` travels toward the NIC, ``up``
toward host memory.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

TRACE_HEADER = ("timestamp_ns", "direction", "tlp_type", "payload_bytes", "tag")
DIRECTIONS = frozenset({"down", "up"})
KINDS = frozenset({"MWr", "MRd", "CplD", "ACK", "UpdateFC"})
DLLP_KINDS = frozenset({"ACK", "UpdateFC"})
PIO_CHUNK_BYTES = 64
DEFAULT_CHUNK_GAP_NS = 5.0


class TraceError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class EstimationError(ValueError):
    """The trace does not support the requested estimate."""


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int  # picoseconds
    direction: str
    kind: str
    payload_bytes: int = 0
    tag: Optional[str] = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise TraceError(f"negative timestamp {self.timestamp}")
        if self.direction not in DIRECTIONS:
            raise TraceError(f"unknown direction {self.direction!r}")
        if self.kind not in KINDS:
            raise TraceError(f"unknown TLP/DLLP type {self.kind!r}")
        if self.payload_bytes < 0:
            raise TraceError(f"negative payload {self.payload_bytes}")
        if self.kind in DLLP_KINDS and self.payload_bytes != 0:
            raise TraceError(f"{self.kind} carries no payload, got {self.payload_bytes} bytes")

    @property
    def time_ns(self) -> float:
        return self.timestamp / 1000


def _parse_timestamp(text: str) -> int:
    """Decimal nanoseconds with up to three fractional digits -> picoseconds."""
    whole, _, frac = text.strip().partition(".")
    if not whole.isdigit() or (frac and not frac.isdigit()) or len(frac) > 3:
        raise ValueError(f"bad timestamp {text!r}")
    return int(whole) * 1000 + int(frac.ljust(3, "0") or 0)


def _format_timestamp(ps: int) -> str:
    return f"{ps // 1000}.{ps % 1000:03d}"


def parse_trace(text: str) -> List[TraceRecord]:
    """Parse trace CSV text; records come back stably sorted by timestamp."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return []
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceError(f"expected header {','.join(TRACE_HEADER)}, got {','.join(header)}", 1)
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) not in (4, 5):
            raise TraceError(f"expected 5 columns, got {len(row)}", lineno)
        try:
            ts = _parse_timestamp(row[0])
            payload = int(row[3])
        except ValueError as exc:
            raise TraceError(str(exc), lineno) from None
        tag = row[4].strip() if len(row) == 5 and row[4].strip() else None
        try:
            records.append(TraceRecord(ts, row[1].strip(), row[2].strip(), payload, tag))
        except TraceError as exc:
            raise TraceError(str(exc), lineno) from None
    records.sort(key=lambda r: r.timestamp)
    return records


def serialize_trace(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in records:
        writer.writerow([_format_timestamp(r.timestamp), r.direction, r.kind, r.payload_bytes, r.tag or ""])
    return buf.getvalue()


@dataclass(frozen=True)
class IntervalStats:
    count: int
    mean: float
    median: float
    p25: float
    p75: float
    min: float
    max: float

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "IntervalStats":
        x = np.asarray(samples, dtype=float)
        if x.size < 1:
            raise EstimationError("no samples")
        p25, median, p75 = np.percentile(x, [25, 50, 75])
        return cls(int(x.size), float(x.mean()), float(median), float(p25), float(p75),
                   float(x.min()), float(x.max()))


def _group_chunks(records: Sequence[TraceRecord], gap_ps: int) -> List[TraceRecord]:
    """Collapse runs of records closer than ``gap_ps`` into their first record."""
    out: List[TraceRecord] = []
    last_ts = None
    for r in records:
        if last_ts is None or r.timestamp - last_ts > gap_ps:
            out.append(r)
        last_ts = r.timestamp
    return out


def injection_interval_stats(
    records: Sequence[TraceRecord],
    direction: str = "down",
    kind: str = "MWr",
    payload: int = PIO_CHUNK_BYTES,
    chunk_gap_ns: float = DEFAULT_CHUNK_GAP_NS,
) -> IntervalStats:
    """Statistics of the gaps between consecutive posts reaching the NIC.

    Chunks of one multi-chunk PIO post that arrive within ``chunk_gap_ns``
    of each other count as a single post.
    """
    matching = [r for r in records if r.direction == direction and r.kind == kind and r.payload_bytes == payload]
    posts = _group_chunks(matching, int(round(chunk_gap_ns * 1000)))
    if len(posts) < 2:
        raise EstimationError(f"need at least 2 matching posts, found {len(posts)}")
    deltas = [(b.timestamp - a.timestamp) / 1000 for a, b in zip(posts, posts[1:])]
    return IntervalStats.from_samples(deltas)


def _is_pio(r: TraceRecord) -> bool:
    return r.direction == "down" and r.kind == "MWr" and r.payload_bytes == PIO_CHUNK_BYTES


def _posts(records: Sequence[TraceRecord], chunk_gap_ns: float) -> List[TraceRecord]:
    """All MWr records with the chunks of each downstream PIO post merged."""
    gap_ps = int(round(chunk_gap_ns * 1000))
    out: List[TraceRecord] = []
    last_chunk = None
    for r in records:
        if r.kind != "MWr":
            continue
        if _is_pio(r) and out and _is_pio(out[-1]) and r.timestamp - last_chunk <= gap_ps:
            last_chunk = r.timestamp
            continue
        last_chunk = r.timestamp
        out.append(r)
    return out


def estimate_pcie(records: Sequence[TraceRecord]) -> float:
    """Half the round trip from a NIC-initiated MWr to the RC's ACK.

    ACKs are matched to upstream MWr in order; an ACK that finds more than
    one unmatched MWr waiting is ambiguous and triggers a warning.
    """
    open_mwr: List[TraceRecord] = []
    halves = []
    ambiguous = []
    for r in records:
        if r.direction == "up" and r.kind == "MWr":
            open_mwr.append(r)
        elif r.direction == "down" and r.kind == "ACK" and open_mwr:
            if len(open_mwr) > 1:
                ambiguous.append(r.time_ns)
            mwr = open_mwr.pop(0)
            halves.append((r.timestamp - mwr.timestamp) / 2000)
    if not halves:
        raise EstimationError("no upstream MWr followed by an ACK")
    if ambiguous:
        warnings.warn(
            f"{len(ambiguous)} of {len(halves)} ACKs had several upstream MWr outstanding "
            f"(first at {ambiguous[0]} ns); matched in order",
            stacklevel=2,
        )
    return float(np.mean(halves))


def estimate_network(records: Sequence[TraceRecord], chunk_gap_ns: float = DEFAULT_CHUNK_GAP_NS) -> float:
    """Half the gap between a ping reaching the NIC and its 64-byte completion write."""
    mwr = [r for r in _posts(records, chunk_gap_ns) if r.payload_bytes == PIO_CHUNK_BYTES]
    halves = [
        (b.timestamp - a.timestamp) / 2000
        for a, b in zip(mwr, mwr[1:])
        if a.direction == "down" and b.direction == "up"
    ]
    if not halves:
        raise EstimationError("no downstream 64-byte MWr followed by an upstream 64-byte MWr")
    return float(np.mean(halves))


def estimate_rc_to_mem(
    records: Sequence[TraceRecord],
    pcie: float,
    llp_post_total: float,
    llp_prog: float,
    msg_size: int = 8,
    chunk_gap_ns: float = DEFAULT_CHUNK_GAP_NS,
) -> float:
    """RC write time recovered from the inbound-pong to outbound-ping gap.

    That gap covers the RC writing the pong, PCIe twice, one successful
    poll and the next post, all of which except the RC write are known.
    """
    posts = _posts(records, chunk_gap_ns)
    estimates = []
    for prev, cur in zip(posts, posts[1:]):
        if _is_pio(cur) and prev.direction == "up" and prev.payload_bytes == msg_size:
            delta = (cur.timestamp - prev.timestamp) / 1000
            estimates.append(delta - 2 * pcie - llp_prog - llp_post_total)
    if not estimates:
        raise EstimationError(f"no inbound {msg_size}-byte MWr followed by an outbound PIO post")
    value = float(np.mean(estimates))
    if value < 0:
        raise EstimationError(
            f"estimated RC-to-memory time is negative ({value:.3f} ns); known components are inconsistent with the trace"
        )
    return value


def estimate_switch(latency_with_switch: float, latency_direct: float) -> float:
    if latency_with_switch <= 0 or latency_direct <= 0:
        raise EstimationError("latencies must be positive")
    value = latency_with_switch - latency_direct
    if value < 0:
        raise EstimationError(f"switched latency is lower than the direct one by {-value:.3f} ns")
    return value
