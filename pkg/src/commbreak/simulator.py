"""Deterministic discrete-event simulation of the PIO send pipeline.

A single CPU posts messages into a bounded transmit queue and polls the
completion queue; each posted doorbell crosses PCIe to the NIC, the
network to the target, and an ACK comes back to trigger the completion
write. Time is kept in integer picoseconds so event ordering is exact;
everything leaving this module is in nanoseconds.

Equal-time events run in (message id, event kind) order.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

from .model import StackLevel
from .timings import ComponentTimings, ConfigError, PipelineConfig, WorkloadMode
from .trace import PIO_CHUNK_BYTES, TraceRecord

PS_PER_NS = 1000
# control + remote-address segments of an inlined send descriptor
PIO_HEADER_BYTES = 48


def to_ps(ns: float) -> int:
    return int(round(ns * PS_PER_NS))


def to_ns(ps: int) -> float:
    return ps / PS_PER_NS


def pio_chunks(message_size: int) -> int:
    """Number of 64-byte PIO chunks for an inlined message."""
    return max(1, math.ceil((PIO_HEADER_BYTES + message_size) / PIO_CHUNK_BYTES))


class SimEventKind(enum.IntEnum):
    POST_BEGIN = 0
    POST_END = 1
    BUSY_POST = 2
    DOORBELL_MWR_ISSUED = 3
    NIC_ARRIVAL = 4
    NET_DEPART = 5
    TARGET_ARRIVAL = 6
    TARGET_PAYLOAD_WRITTEN = 7
    ACK_ARRIVAL = 8
    COMPLETION_MWR_ISSUED = 9
    COMPLETION_VISIBLE = 10
    POLL_BEGIN = 11
    POLL_SUCCESS = 12
    POLL_EMPTY = 13

    @property
    def label(self) -> str:
        return self.name.lower()


# bookkeeping events, never logged
_CPU_STEP = 100
_CPU_POLL = 101
_CREDIT_RETURN = 102


class ConfigurationDeadlock(RuntimeError):
    """The transmit queue is full and nothing in flight can ever free it."""


@dataclass
class SimResult:
    mode: WorkloadMode
    nic_arrival_times: List[float]
    busy_post_count: int
    completions_written: int
    per_message_latency: List[float]
    event_log: List[Tuple[float, int, SimEventKind]]
    n_messages: int
    pcie_ns: float
    message_size_bytes: int
    level: StackLevel = StackLevel.LLP_ONLY

    @property
    def post_attempts(self) -> int:
        return self.n_messages + self.busy_post_count

    def interarrival(self) -> List[float]:
        t = self.nic_arrival_times
        return [b - a for a, b in zip(t, t[1:])]

    def mean_interarrival(self) -> float:
        t = self.nic_arrival_times
        if len(t) < 2:
            raise ValueError("need at least two arrivals")
        return (t[-1] - t[0]) / (len(t) - 1)

    def steady_state_interarrival(self, discard_fraction: float = 0.5, period: int = 1) -> float:
        """Mean arrival interval after dropping the warm-up part of the run.

        Arrivals repeat with a pattern ``period`` messages long when polls
        or completions are batched; the window is cut to whole periods so
        the mean is not biased by where it ends.
        """
        t = self.nic_arrival_times
        start = min(int(len(t) * discard_fraction), len(t) - 2)
        if start < 0:
            raise ValueError("need at least two arrivals")
        count = len(t) - 1 - start
        if period > 1 and count >= period:
            count -= count % period
        return (t[start + count] - t[start]) / count

    def mean_latency(self) -> float:
        if not self.per_message_latency:
            raise ValueError("no latency samples (not a ping-pong run)")
        return sum(self.per_message_latency) / len(self.per_message_latency)

    def event_log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time_ns", "msg_id", "event"])
        for time_ns, msg, kind in self.event_log:
            ps = to_ps(time_ns)
            writer.writerow([f"{ps // PS_PER_NS}.{ps % PS_PER_NS:03d}", msg, kind.label])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {
            "mode": self.mode.value,
            "level": self.level.value,
            "n_messages": self.n_messages,
            "busy_post_count": self.busy_post_count,
            "post_attempts": self.post_attempts,
            "completions_written": self.completions_written,
            "events": len(self.event_log),
        }
        if len(self.nic_arrival_times) >= 2:
            out["mean_interarrival_ns"] = self.mean_interarrival()
            out["steady_state_interarrival_ns"] = self.steady_state_interarrival()
        if self.per_message_latency:
            out["mean_latency_ns"] = self.mean_latency()
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


class _Simulation:
    def __init__(self, t: ComponentTimings, cfg: PipelineConfig, level: StackLevel):
        self.cfg = cfg
        self.mode = cfg.workload_mode
        self.level = StackLevel(level)
        self.heap: List[Tuple[int, int, int, int]] = []
        self.seq = 0
        self.now = 0
        self.log: List[Tuple[int, int, SimEventKind]] = []

        full = self.mode is WorkloadMode.MPI_WINDOW or self.level is StackLevel.FULL_STACK
        self.post_ps = to_ps(t.llp_post_total() + (t.hlp_post_total() if full else 0.0))
        self.busy_ps = to_ps(t.misc.busy_post)
        if self.mode is WorkloadMode.MPI_WINDOW:
            self.misc_ps = to_ps(t.misc.per_msg_misc_full)
        else:
            self.misc_ps = to_ps(t.misc.measurement_update)
        self.llp_prog_ps = to_ps(t.llp_prog)
        self.tx_prog_ps = to_ps(t.hlp.tx_prog)
        self.rx_prog_ps = to_ps(t.llp_prog + (t.hlp_rx_prog_total() if full else 0.0))
        self.pcie_ps = to_ps(t.io_net.pcie)
        self.net_ps = to_ps(t.network_total())
        self.nic_ps = to_ps(cfg.nic_service_ns)
        self.rc_msg_ps = to_ps(t.rc_to_mem(cfg.message_size_bytes))
        self.rc_cqe_ps = to_ps(t.rc_to_mem(cfg.completion_size_bytes))

        self.credits = cfg.rc_credits
        self.rc_backlog: deque = deque()

        self.n = 0
        self.next_msg = 0
        self.since_poll = 0
        self.txq: deque = deque()
        self.cq: deque = deque()
        self.pending_signaled = 0
        self.cpu_waiting = False
        self.poll_from_busy = False
        self.busy_posts = 0
        self.completions = 0
        self.signaled: Dict[int, bool] = {}
        self.nic_arrival: Dict[int, int] = {}
        self.ping_start: Dict[int, int] = {}
        self.latencies: List[float] = []
        self.n_iters = 0

        self.handlers: Dict[int, Callable[[int], None]] = {
            SimEventKind.POST_END: self._on_post_end,
            SimEventKind.DOORBELL_MWR_ISSUED: self._on_doorbell,
            SimEventKind.NIC_ARRIVAL: self._on_nic_arrival,
            SimEventKind.NET_DEPART: self._on_net_depart,
            SimEventKind.TARGET_ARRIVAL: self._on_target_arrival,
            SimEventKind.TARGET_PAYLOAD_WRITTEN: self._on_payload_written,
            SimEventKind.ACK_ARRIVAL: self._on_ack,
            SimEventKind.COMPLETION_MWR_ISSUED: self._on_completion_issued,
            SimEventKind.COMPLETION_VISIBLE: self._on_completion_visible,
            SimEventKind.POLL_SUCCESS: self._on_poll_done,
            SimEventKind.POLL_EMPTY: self._on_poll_done,
            _CPU_STEP: lambda msg: self._cpu_step(),
            _CPU_POLL: lambda msg: self._poll_begin(msg),
            _CREDIT_RETURN: self._on_credit_return,
        }

    # -- engine ------------------------------------------------------------

    def at(self, delay_ps: int, msg: int, kind: int) -> None:
        heapq.heappush(self.heap, (self.now + delay_ps, msg, kind, self.seq))
        self.seq += 1

    def record(self, msg: int, kind: SimEventKind) -> None:
        self.log.append((self.now, msg, kind))

    def run(self) -> None:
        while self.heap:
            time, msg, kind, _ = heapq.heappop(self.heap)
            self.now = time
            if kind < _CPU_STEP:
                self.record(msg, SimEventKind(kind))
            handler = self.handlers.get(kind)
            if handler is not None:
                handler(msg)

    # -- CPU (injection workloads) ------------------------------------------

    def _cpu_step(self) -> None:
        if self.next_msg >= self.n:
            return
        if self.since_poll >= self.cfg.poll_interval_p:
            self.poll_from_busy = False
            self._poll_begin(self.next_msg - 1)
        elif len(self.txq) < self.cfg.txq_depth:
            self._post(self.next_msg)
        else:
            msg = self.next_msg
            self.record(msg, SimEventKind.BUSY_POST)
            self.busy_posts += 1
            self.poll_from_busy = True
            self.at(self.busy_ps, msg - 1, _CPU_POLL)

    def _post(self, msg: int) -> None:
        self.next_msg += 1
        self.signaled[msg] = (msg + 1) % self.cfg.unsignaled_interval_c == 0
        self.record(msg, SimEventKind.POST_BEGIN)
        self.at(self.post_ps, msg, SimEventKind.POST_END)

    def _poll_begin(self, msg: int) -> None:
        self.record(msg, SimEventKind.POLL_BEGIN)
        if self.cq:
            freed = 0
            entries = 0
            while self.cq and entries < self.cfg.poll_batch_b:
                covered = self.cq.popleft()
                entries += 1
                while self.txq and self.txq[0] <= covered:
                    self.txq.popleft()
                    freed += 1
            if self.mode is WorkloadMode.MPI_WINDOW:
                cost = freed * self.tx_prog_ps
            else:
                cost = entries * self.llp_prog_ps
            self.since_poll = 0
            self.at(cost, msg, SimEventKind.POLL_SUCCESS)
            return

        # the put_bw loop waits for its completion; busy retries always wait
        blocking = self.poll_from_busy or self.mode is WorkloadMode.LLP_PUTBW
        if blocking and self.pending_signaled > 0:
            # spinning on an empty CQ is collapsed into one wait
            self.record(msg, SimEventKind.POLL_EMPTY)
            self.cpu_waiting = True
            return
        if self.poll_from_busy:
            raise ConfigurationDeadlock(
                f"transmit queue full ({len(self.txq)}/{self.cfg.txq_depth}) with no completion "
                f"pending at t={to_ns(self.now)} ns; unsignaled interval "
                f"{self.cfg.unsignaled_interval_c} cannot drain it"
            )
        self.since_poll = 0
        self.at(self.llp_prog_ps, msg, SimEventKind.POLL_EMPTY)

    def _on_poll_done(self, msg: int) -> None:
        if self.mode is WorkloadMode.LLP_PINGPONG:
            self._pingpong_received(msg)
        else:
            self._cpu_step()

    # -- pipeline ------------------------------------------------------------

    def _on_post_end(self, msg: int) -> None:
        if self.mode is not WorkloadMode.LLP_PINGPONG:
            self.txq.append(msg)
            if self.signaled[msg]:
                self.pending_signaled += 1
        self._ring(msg)
        if self.mode is not WorkloadMode.LLP_PINGPONG:
            self.since_poll += 1
            self.at(self.misc_ps, msg, _CPU_STEP)

    def _ring(self, msg: int) -> None:
        if self.credits is None:
            self.at(0, msg, SimEventKind.DOORBELL_MWR_ISSUED)
        elif self.credits > 0:
            self.credits -= 1
            self.at(0, msg, SimEventKind.DOORBELL_MWR_ISSUED)
        else:
            self.rc_backlog.append(msg)

    def _on_doorbell(self, msg: int) -> None:
        self.at(self.pcie_ps, msg, SimEventKind.NIC_ARRIVAL)
        if self.credits is not None:
            # NIC returns the credit with an UpdateFC that crosses PCIe back
            self.at(2 * self.pcie_ps, msg, _CREDIT_RETURN)

    def _on_credit_return(self, msg: int) -> None:
        self.credits += 1
        if self.rc_backlog:
            self.credits -= 1
            self.at(0, self.rc_backlog.popleft(), SimEventKind.DOORBELL_MWR_ISSUED)

    def _on_nic_arrival(self, msg: int) -> None:
        self.nic_arrival[msg] = self.now
        self.at(self.nic_ps, msg, SimEventKind.NET_DEPART)

    def _on_net_depart(self, msg: int) -> None:
        self.at(self.net_ps, msg, SimEventKind.TARGET_ARRIVAL)

    def _on_target_arrival(self, msg: int) -> None:
        # the target NIC ACKs on arrival, before its own payload DMA write
        self.at(self.net_ps, msg, SimEventKind.ACK_ARRIVAL)
        self.at(self.pcie_ps + self.rc_msg_ps, msg, SimEventKind.TARGET_PAYLOAD_WRITTEN)

    def _on_payload_written(self, msg: int) -> None:
        if self.mode is WorkloadMode.LLP_PINGPONG:
            self.record(msg, SimEventKind.POLL_BEGIN)
            self.at(self.rx_prog_ps, msg, SimEventKind.POLL_SUCCESS)

    def _on_ack(self, msg: int) -> None:
        if self.signaled[msg]:
            self.at(0, msg, SimEventKind.COMPLETION_MWR_ISSUED)

    def _on_completion_issued(self, msg: int) -> None:
        self.completions += 1
        self.at(self.pcie_ps + self.rc_cqe_ps, msg, SimEventKind.COMPLETION_VISIBLE)

    def _on_completion_visible(self, msg: int) -> None:
        if self.mode is WorkloadMode.LLP_PINGPONG:
            return
        self.cq.append(msg)
        self.pending_signaled -= 1
        if self.cpu_waiting:
            self.cpu_waiting = False
            self._poll_begin(self.next_msg - 1)

    # -- ping-pong -------------------------------------------------------------

    def _pingpong_received(self, msg: int) -> None:
        if msg % 2 == 0:
            self._send(msg + 1)
            return
        start = self.ping_start[msg - 1]
        self.latencies.append(to_ns(self.now - start) / 2)
        if (msg + 1) // 2 < self.n_iters:
            self._send(msg + 1)

    def _send(self, msg: int) -> None:
        # each node counts its own sends for completion signaling
        self.signaled[msg] = (msg // 2 + 1) % self.cfg.unsignaled_interval_c == 0
        if msg % 2 == 0:
            self.ping_start[msg] = self.now
        self.record(msg, SimEventKind.POST_BEGIN)
        self.at(self.post_ps, msg, SimEventKind.POST_END)


def _result(sim: _Simulation, n_messages: int) -> SimResult:
    return SimResult(
        mode=sim.mode,
        nic_arrival_times=[to_ns(sim.nic_arrival[m]) for m in sorted(sim.nic_arrival)],
        busy_post_count=sim.busy_posts,
        completions_written=sim.completions,
        per_message_latency=sim.latencies,
        event_log=[(to_ns(ps), msg, kind) for ps, msg, kind in sim.log],
        n_messages=n_messages,
        pcie_ns=to_ns(sim.pcie_ps),
        message_size_bytes=sim.cfg.message_size_bytes,
        level=sim.level,
    )


def simulate_injection(t: ComponentTimings, cfg: PipelineConfig, n_messages: int) -> SimResult:
    """Stream ``n_messages`` back-to-back posts from one CPU.

    In ``llp_putbw`` mode the loop mirrors a verbs-level put bandwidth
    test: after every ``poll_interval_p`` posts the CPU polls for one
    completion and waits for it if one is in flight. In ``mpi_window``
    mode each post also pays the MPI and protocol layers, periodic polls
    never wait, and reaping a completion costs ``tx_prog`` per freed slot.

    In both modes a post into a full transmit queue is a busy post: the
    CPU pays ``busy_post``, polls (waiting if needed) and retries.

    Raises:
        ConfigurationDeadlock: the queue is full and no signaled
            completion is outstanding, e.g. ``unsignaled_interval_c``
            larger than ``txq_depth``.
    """
    if cfg.workload_mode not in (WorkloadMode.LLP_PUTBW, WorkloadMode.MPI_WINDOW):
        raise ConfigError(f"simulate_injection needs llp_putbw or mpi_window, got {cfg.workload_mode.value}")
    if n_messages < 1:
        raise ConfigError("n_messages must be at least 1")
    level = StackLevel.FULL_STACK if cfg.workload_mode is WorkloadMode.MPI_WINDOW else StackLevel.LLP_ONLY
    sim = _Simulation(t, cfg, level)
    sim.n = n_messages
    sim._cpu_step()
    sim.run()
    return _result(sim, n_messages)


def simulate_pingpong(
    t: ComponentTimings,
    cfg: PipelineConfig,
    n_iters: int,
    level: StackLevel = StackLevel.LLP_ONLY,
) -> SimResult:
    """Two nodes bounce one message back and forth ``n_iters`` times.

    Even message ids are pings from node 1, odd ids are pongs from node 2.
    ``per_message_latency`` holds half of each round trip.
    """
    if cfg.workload_mode is not WorkloadMode.LLP_PINGPONG:
        raise ConfigError(f"simulate_pingpong needs llp_pingpong, got {cfg.workload_mode.value}")
    if n_iters < 1:
        raise ConfigError("n_iters must be at least 1")
    sim = _Simulation(t, cfg, level)
    sim.n_iters = n_iters
    sim._send(0)
    sim.run()
    return _result(sim, 2 * n_iters)


def synth_trace(result: SimResult, cfg: PipelineConfig) -> List[TraceRecord]:
    """PCIe records an analyzer next to node 1's NIC would capture.

    Node 1 is the only sender in injection runs and the ping side in
    ping-pong runs.
    """
    pcie_rt = 2 * to_ps(result.pcie_ns)
    pingpong = result.mode is WorkloadMode.LLP_PINGPONG
    chunks = pio_chunks(cfg.message_size_bytes)
    records: List[TraceRecord] = []
    for time_ns, msg, kind in result.event_log:
        from_node1 = not pingpong or msg % 2 == 0
        ts = to_ps(time_ns)
        if kind is SimEventKind.NIC_ARRIVAL and from_node1:
            for _ in range(chunks):
                records.append(TraceRecord(ts, "down", "MWr", PIO_CHUNK_BYTES, "pio"))
        elif kind is SimEventKind.COMPLETION_MWR_ISSUED and from_node1:
            records.append(TraceRecord(ts, "up", "MWr", cfg.completion_size_bytes, "cqe"))
            records.append(TraceRecord(ts + pcie_rt, "down", "ACK", 0, "ack"))
        elif kind is SimEventKind.TARGET_ARRIVAL and pingpong and not from_node1:
            records.append(TraceRecord(ts, "up", "MWr", result.message_size_bytes, "payload"))
            records.append(TraceRecord(ts + pcie_rt, "down", "ACK", 0, "ack"))
    records.sort(key=lambda r: r.timestamp)
    return records
