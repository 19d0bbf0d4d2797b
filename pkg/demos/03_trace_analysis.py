"""Recovering component times from a PCIe trace.

A synthetic analyzer capture is produced by the simulator, written to
CSV, read back, and fed to the estimators. The estimates should land on
the values the simulation was given.
"""

import tempfile
from pathlib import Path

from commbreak import (PipelineConfig, WorkloadMode, default_timings, estimate_network, estimate_pcie,
                       estimate_rc_to_mem, estimate_switch, injection_interval_stats, parse_trace,
                       serialize_trace, simulate_injection, simulate_pingpong, synth_trace)

t = default_timings()
pp = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG)
records = synth_trace(simulate_pingpong(t, pp, 50), pp)

with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "pingpong.csv"
    path.write_text(serialize_trace(records))
    print("first rows of the capture:")
    print("\n".join("  " + ln for ln in path.read_text().splitlines()[:6]))
    records = parse_trace(path.read_text())

pcie = estimate_pcie(records)
print(f"\nPCIe        {pcie:8.2f} ns  (given {t.io_net.pcie})")
print(f"Network     {estimate_network(records):8.2f} ns  (given {t.network_total():.2f})")
rc = estimate_rc_to_mem(records, pcie, t.llp_post_total(), t.llp_prog, msg_size=8)
print(f"RCtoMem[8]  {rc:8.2f} ns  (given {t.rc_to_mem(8)})")

# the switch shows up as the difference between two latency runs
direct = t.__class__(t.llp_post, t.llp_prog, t.misc, t.hlp,
                     t.io_net.__class__(t.io_net.pcie, t.io_net.wire, t.io_net.switch, t.io_net.rc_to_mem, False))
with_sw = simulate_pingpong(t, pp, 5).mean_latency()
without = simulate_pingpong(direct, pp, 5).mean_latency()
print(f"Switch      {estimate_switch(with_sw, without):8.2f} ns  (given {t.io_net.switch})")

cfg = PipelineConfig(poll_interval_p=16)
stats = injection_interval_stats(synth_trace(simulate_injection(t, cfg, 5000), cfg))
print(f"\ninjection intervals from a put-bandwidth capture: mean {stats.mean:.2f}, median {stats.median:.2f}, "
      f"min {stats.min:.2f}, max {stats.max:.2f} ns over {stats.count} gaps")
