"""Component-level performance models of small-message communication.

Closed-form injection-overhead and latency models, a discrete-event
simulator of the post/progress/completion pipeline, PCIe trace analysis
and what-if sweeps.
"""

from .model import (BreakdownReport, Granularity, Metric, ModelError, StackLevel, breakdown, cpu_time,
                    gen_completion, inj_overhead, latency, min_poll_interval, msg_inj_overhead)
from .simulator import ConfigurationDeadlock, SimResult, simulate_injection, simulate_pingpong, synth_trace
from .timings import (ComponentTimings, ConfigError, HlpTimings, IoNetworkTimings, LlpPostBreakdown,
                      MiscTimings, PipelineConfig, WorkloadMode, default_timings, emit_config, load_timings,
                      load_timings_file)
from .trace import (EstimationError, TraceError, TraceRecord, estimate_network, estimate_pcie,
                    estimate_rc_to_mem, estimate_switch, injection_interval_stats, parse_trace, serialize_trace)
from .whatif import OptimizationTarget, WhatIfPoint, apply_reduction, sweep

__version__ = "0.1.0"
