"""Component timing parameters and their config-file format.

Every duration is a float in nanoseconds. The config format is one
``dotted.key = value`` per line with ``#`` comments::

    llp_post.pio_copy = 94.25
    io.rc_to_mem.8 = 240.96
    net.has_switch = true

Keys under ``pipeline.`` and ``run.`` are reserved for the pipeline and
command-line settings; :func:`load_timings` skips them and rejects any
other key it does not know.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

RESERVED_PREFIXES = ("pipeline.", "run.")


class ConfigError(ValueError):
    """Raised for malformed, incomplete, or out-of-range configuration."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _check_duration(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be a finite non-negative duration, got {value!r}")


def _check_fields(obj) -> None:
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            _check_duration(f"{type(obj).__name__}.{f.name}", value)


@dataclass(frozen=True)
class LlpPostBreakdown:
    """The five steps of a PIO post in the low-level protocol."""

    md_setup: float = 0.0
    barrier_md: float = 0.0
    barrier_dbc: float = 0.0
    pio_copy: float = 0.0
    misc_llp_post: float = 0.0

    def __post_init__(self):
        _check_fields(self)

    def total(self) -> float:
        return self.md_setup + self.barrier_md + self.barrier_dbc + self.pio_copy + self.misc_llp_post


@dataclass(frozen=True)
class MiscTimings:
    busy_post: float = 0.0
    measurement_update: float = 0.0
    # amortized busy-post time per operation inside an MPI window
    per_msg_misc_full: float = 0.0

    def __post_init__(self):
        _check_fields(self)


@dataclass(frozen=True)
class HlpTimings:
    """High-level protocol (MPI library + protocol layer) times."""

    isend_mpi_layer: float = 0.0
    isend_proto_layer: float = 0.0
    tx_prog: float = 0.0
    rx_cb_mpi: float = 0.0
    rx_cb_proto: float = 0.0
    rx_post_progress_mpi: float = 0.0

    def __post_init__(self):
        _check_fields(self)


@dataclass(frozen=True)
class IoNetworkTimings:
    pcie: float = 0.0
    wire: float = 0.0
    switch: float = 0.0
    rc_to_mem: Mapping[int, float] = field(default_factory=lambda: {8: 0.0})
    has_switch: bool = True

    def __post_init__(self):
        _check_duration("pcie", self.pcie)
        _check_duration("wire", self.wire)
        _check_duration("switch", self.switch)
        if not self.rc_to_mem:
            raise ConfigError("rc_to_mem table needs at least one size")
        table = {}
        for size, value in self.rc_to_mem.items():
            if isinstance(size, bool) or not isinstance(size, int) or size <= 0:
                raise ConfigError(f"rc_to_mem size must be a positive integer, got {size!r}")
            _check_duration(f"rc_to_mem[{size}]", value)
            table[size] = value
        object.__setattr__(self, "rc_to_mem", dict(sorted(table.items())))

    def network_total(self) -> float:
        return self.wire + (self.switch if self.has_switch else 0.0)

    def rc_to_mem_for(self, size: int) -> float:
        """RC-to-memory write time for an ``size``-byte payload.

        Uses the nearest listed size at or above ``size``; past the largest
        listed size the largest entry is used.
        """
        if size <= 0:
            raise ValueError(f"payload size must be positive, got {size}")
        for listed, value in self.rc_to_mem.items():
            if listed >= size:
                return value
        return self.rc_to_mem[max(self.rc_to_mem)]


@dataclass(frozen=True)
class ComponentTimings:
    llp_post: LlpPostBreakdown = field(default_factory=LlpPostBreakdown)
    llp_prog: float = 0.0
    misc: MiscTimings = field(default_factory=MiscTimings)
    hlp: HlpTimings = field(default_factory=HlpTimings)
    io_net: IoNetworkTimings = field(default_factory=IoNetworkTimings)

    def __post_init__(self):
        _check_duration("llp_prog", self.llp_prog)

    def llp_post_total(self) -> float:
        return self.llp_post.total()

    def misc_inj_total(self) -> float:
        return self.misc.busy_post + self.misc.measurement_update

    def network_total(self) -> float:
        return self.io_net.network_total()

    def hlp_post_total(self) -> float:
        return self.hlp.isend_mpi_layer + self.hlp.isend_proto_layer

    def hlp_rx_prog_total(self) -> float:
        return self.hlp.rx_cb_mpi + self.hlp.rx_cb_proto + self.hlp.rx_post_progress_mpi

    def rc_to_mem(self, size: int) -> float:
        return self.io_net.rc_to_mem_for(size)


# Functional spellings, handy for map() and for symmetry with the model module.
def llp_post_total(t: ComponentTimings) -> float:
    return t.llp_post_total()


def misc_inj_total(t: ComponentTimings) -> float:
    return t.misc_inj_total()


def network_total(t: ComponentTimings) -> float:
    return t.network_total()


def hlp_post_total(t: ComponentTimings) -> float:
    return t.hlp_post_total()


def hlp_rx_prog_total(t: ComponentTimings) -> float:
    return t.hlp_rx_prog_total()


class WorkloadMode(str, enum.Enum):
    LLP_PUTBW = "llp_putbw"
    LLP_PINGPONG = "llp_pingpong"
    MPI_WINDOW = "mpi_window"


@dataclass(frozen=True)
class PipelineConfig:
    """Queueing and polling parameters of the simulated transport.

    ``rc_credits=None`` means unlimited posted-write credits at the root
    complex.
    """

    poll_interval_p: int = 16
    poll_batch_b: int = 1
    txq_depth: int = 64
    unsignaled_interval_c: int = 1
    rc_credits: Optional[int] = None
    message_size_bytes: int = 8
    completion_size_bytes: int = 64
    workload_mode: WorkloadMode = WorkloadMode.LLP_PUTBW
    nic_service_ns: float = 0.0

    def __post_init__(self):
        for name in ("poll_interval_p", "poll_batch_b", "txq_depth", "unsignaled_interval_c",
                     "message_size_bytes", "completion_size_bytes"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.rc_credits is not None and (not isinstance(self.rc_credits, int) or self.rc_credits < 1):
            raise ConfigError(f"rc_credits must be a positive integer or None, got {self.rc_credits!r}")
        if self.poll_batch_b > self.txq_depth:
            raise ConfigError("poll_batch_b cannot exceed txq_depth")
        object.__setattr__(self, "workload_mode", WorkloadMode(self.workload_mode))
        _check_duration("nic_service_ns", self.nic_service_ns)


# ---------------------------------------------------------------------------
# config text

# key -> (section attribute, field name); None section means top level
_DURATION_KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "llp_post.md_setup": ("llp_post", "md_setup"),
    "llp_post.barrier_md": ("llp_post", "barrier_md"),
    "llp_post.barrier_dbc": ("llp_post", "barrier_dbc"),
    "llp_post.pio_copy": ("llp_post", "pio_copy"),
    "llp_post.misc": ("llp_post", "misc_llp_post"),
    "llp_prog": (None, "llp_prog"),
    "misc.busy_post": ("misc", "busy_post"),
    "misc.measurement_update": ("misc", "measurement_update"),
    "misc.per_msg_full": ("misc", "per_msg_misc_full"),
    "hlp.isend_mpi": ("hlp", "isend_mpi_layer"),
    "hlp.isend_proto": ("hlp", "isend_proto_layer"),
    "hlp.tx_prog": ("hlp", "tx_prog"),
    "hlp.rx_cb_mpi": ("hlp", "rx_cb_mpi"),
    "hlp.rx_cb_proto": ("hlp", "rx_cb_proto"),
    "hlp.rx_post_progress_mpi": ("hlp", "rx_post_progress_mpi"),
    "io.pcie": ("io_net", "pcie"),
    "net.wire": ("io_net", "wire"),
    "net.switch": ("io_net", "switch"),
}
REQUIRED_KEYS = (
    "llp_post.md_setup", "llp_post.barrier_md", "llp_post.barrier_dbc", "llp_post.pio_copy",
    "llp_post.misc", "llp_prog", "io.pcie", "net.wire",
)
RC_TO_MEM_PREFIX = "io.rc_to_mem."

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def parse_config_lines(text: str) -> Dict[str, Tuple[str, int]]:
    """Split config text into ``{key: (raw value, line number)}``."""
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {line!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", lineno)
        entries[key] = (value, lineno)
    return entries


def parse_bool(raw: str, key: str = "", lineno: Optional[int] = None) -> bool:
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}", lineno)


def _parse_duration(raw: str, key: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}", lineno) from None
    if not math.isfinite(value) or value < 0:
        raise ConfigError(f"{key}: duration must be finite and non-negative, got {raw}", lineno)
    return value


def load_timings(config_text: str, defaults: Optional[ComponentTimings] = None) -> ComponentTimings:
    """Parse config text into :class:`ComponentTimings`.

    Required keys are the five LLP_post steps, ``llp_prog``, ``io.pcie`` and
    ``net.wire``; everything else falls back to ``defaults`` (the shipped
    measured values unless given). Any ``io.rc_to_mem.<size>`` key replaces
    the whole default RC-to-memory table.
    """
    entries = parse_config_lines(config_text)
    if defaults is None:
        defaults = default_timings()

    missing = [k for k in REQUIRED_KEYS if k not in entries]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    sections = {
        "llp_post": dataclasses.asdict(defaults.llp_post),
        "misc": dataclasses.asdict(defaults.misc),
        "hlp": dataclasses.asdict(defaults.hlp),
        "io_net": {"pcie": defaults.io_net.pcie, "wire": defaults.io_net.wire,
                   "switch": defaults.io_net.switch, "has_switch": defaults.io_net.has_switch},
    }
    top = {"llp_prog": defaults.llp_prog}
    rc_table: Dict[int, float] = {}

    for key, (raw, lineno) in entries.items():
        if key.startswith(RESERVED_PREFIXES):
            continue
        if key in _DURATION_KEYS:
            section, name = _DURATION_KEYS[key]
            value = _parse_duration(raw, key, lineno)
            (top if section is None else sections[section])[name] = value
        elif key == "net.has_switch":
            sections["io_net"]["has_switch"] = parse_bool(raw, key, lineno)
        elif key.startswith(RC_TO_MEM_PREFIX):
            size_text = key[len(RC_TO_MEM_PREFIX):]
            if not size_text.isdigit() or int(size_text) <= 0:
                raise ConfigError(f"{key}: size must be a positive integer", lineno)
            rc_table[int(size_text)] = _parse_duration(raw, key, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)

    io_net = IoNetworkTimings(rc_to_mem=rc_table or dict(defaults.io_net.rc_to_mem), **sections["io_net"])
    return ComponentTimings(
        llp_post=LlpPostBreakdown(**sections["llp_post"]),
        llp_prog=top["llp_prog"],
        misc=MiscTimings(**sections["misc"]),
        hlp=HlpTimings(**sections["hlp"]),
        io_net=io_net,
    )


def emit_config(t: ComponentTimings) -> str:
    """Serialize timings so that ``load_timings(emit_config(t)) == t``."""
    lines: List[str] = []
    for key, (section, name) in _DURATION_KEYS.items():
        obj = t if section is None else getattr(t, section)
        lines.append(f"{key} = {getattr(obj, name)!r}")
    lines.append(f"net.has_switch = {'true' if t.io_net.has_switch else 'false'}")
    for size, value in t.io_net.rc_to_mem.items():
        lines.append(f"{RC_TO_MEM_PREFIX}{size} = {value!r}")
    return "\n".join(lines) + "\n"


DEFAULT_CONFIG_NAME = "measured.cfg"


def default_config_path() -> Path:
    return Path(str(resources.files("commbreak") / "data" / DEFAULT_CONFIG_NAME))


def default_config_text() -> str:
    return (resources.files("commbreak") / "data" / DEFAULT_CONFIG_NAME).read_text(encoding="utf-8")


_DEFAULT: Optional[ComponentTimings] = None


def default_timings() -> ComponentTimings:
    """The shipped measured values."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_timings(default_config_text(), defaults=ComponentTimings())
    return _DEFAULT


def load_timings_file(path) -> ComponentTimings:
    return load_timings(Path(path).read_text(encoding="utf-8"))


# pipeline.<key> -> (field, converter)
_PIPELINE_KEYS = {
    "pipeline.poll_interval": "poll_interval_p",
    "pipeline.poll_batch": "poll_batch_b",
    "pipeline.txq_depth": "txq_depth",
    "pipeline.unsignaled_interval": "unsignaled_interval_c",
    "pipeline.rc_credits": "rc_credits",
    "pipeline.message_size": "message_size_bytes",
    "pipeline.completion_size": "completion_size_bytes",
    "pipeline.mode": "workload_mode",
    "pipeline.nic_service": "nic_service_ns",
}


def load_pipeline(config_text: str, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Read the optional ``pipeline.*`` keys of a config into a :class:`PipelineConfig`."""
    overrides = {}
    for key, (raw, lineno) in parse_config_lines(config_text).items():
        if not key.startswith("pipeline."):
            continue
        if key not in _PIPELINE_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        name = _PIPELINE_KEYS[key]
        try:
            if name == "workload_mode":
                overrides[name] = WorkloadMode(raw)
            elif name == "nic_service_ns":
                overrides[name] = _parse_duration(raw, key, lineno)
            elif name == "rc_credits" and raw.lower() in ("unlimited", "none", "inf"):
                overrides[name] = None
            else:
                overrides[name] = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
    return dataclasses.replace(base or PipelineConfig(), **overrides)


def iter_duration_fields(t: ComponentTimings) -> Iterable[Tuple[str, float]]:
    """Yield ``(config key, value)`` for every scalar duration in ``t``."""
    for key, (section, name) in _DURATION_KEYS.items():
        obj = t if section is None else getattr(t, section)
        yield key, getattr(obj, name)
    for size, value in t.io_net.rc_to_mem.items():
        yield f"{RC_TO_MEM_PREFIX}{size}", value


def with_field(t: ComponentTimings, key: str, value: float) -> ComponentTimings:
    """Copy of ``t`` with the duration at config ``key`` replaced."""
    if key.startswith(RC_TO_MEM_PREFIX):
        table = dict(t.io_net.rc_to_mem)
        table[int(key[len(RC_TO_MEM_PREFIX):])] = value
        return dataclasses.replace(t, io_net=dataclasses.replace(t.io_net, rc_to_mem=table))
    section, name = _DURATION_KEYS[key]
    if section is None:
        return dataclasses.replace(t, **{name: value})
    return dataclasses.replace(t, **{section: dataclasses.replace(getattr(t, section), **{name: value})})
