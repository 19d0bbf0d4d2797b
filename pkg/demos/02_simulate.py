"""The event simulator agrees with the closed-form models.

A put-bandwidth loop that polls every 16 posts settles at the injection
model's value. Polling after every post instead turns each post into a
synchronous round trip. Ping-pong latency matches exactly.
"""

import dataclasses

from commbreak import (PipelineConfig, StackLevel, WorkloadMode, default_timings, gen_completion,
                       inj_overhead, latency, min_poll_interval, simulate_injection, simulate_pingpong)

t = default_timings()
cfg = PipelineConfig(poll_interval_p=16, unsignaled_interval_c=1, txq_depth=64)

print(f"A completion takes {gen_completion(t):.2f} ns to appear, about {min_poll_interval(t)} posts' worth.")
print("Polling after every post waits on that each time; longer intervals let completions pile up in the")
print("queue so that a poll always finds one.")

run = simulate_injection(t, cfg, 10_000)
print(f"\np=16: steady inter-arrival {run.steady_state_interarrival():.2f} ns "
      f"(model {inj_overhead(t):.2f}), {run.busy_post_count} busy posts")

for p in (1, 2, 4, 8, 16, 32):
    r = simulate_injection(t, dataclasses.replace(cfg, poll_interval_p=p), 4000)
    print(f"  poll every {p:2d} posts -> {r.steady_state_interarrival(period=p):8.2f} ns per message")

# PCIe speed does not matter while posts overlap with transfers
for scale in (0.25, 1, 4):
    slow = dataclasses.replace(t, io_net=dataclasses.replace(t.io_net, pcie=t.io_net.pcie * scale))
    r = simulate_injection(slow, cfg, 4000)
    print(f"  pcie x{scale:<4} -> {r.steady_state_interarrival():.2f} ns")

pp = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG)
for level in StackLevel:
    r = simulate_pingpong(t, pp, 20, level)
    print(f"\nping-pong {level.value}: {r.mean_latency():.2f} ns one way (model {latency(t, level):.2f})")

window = PipelineConfig(poll_interval_p=64, unsignaled_interval_c=64, txq_depth=128,
                        workload_mode=WorkloadMode.MPI_WINDOW)
r = simulate_injection(t, window, 8192)
print(f"\nMPI window, one completion per 64 sends: {r.steady_state_interarrival(period=64):.2f} ns "
      f"(model {inj_overhead(t, StackLevel.FULL_STACK):.2f})")
