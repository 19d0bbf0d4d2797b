"""Where does the time go in one small message?

Loads the shipped measurements, prints both models at both stack levels,
and then breaks end-to-end latency down three ways.
"""

from commbreak import Granularity, Metric, StackLevel, breakdown, default_timings, inj_overhead, latency

t = default_timings()

print("Injection overhead is the steady-state gap between messages at the NIC.")
for level in StackLevel:
    print(f"  {level.value:10s}  injection {inj_overhead(t, level):8.2f} ns   latency {latency(t, level):8.2f} ns")

print("\nFull-stack latency, term by term:")
for e in breakdown(t, Metric.LATENCY, StackLevel.FULL_STACK).entries:
    print(f"  {e.label:12s} {e.ns:8.2f} ns  {e.percent:5.1f}%")

print("\nGrouped into CPU, I/O and network:")
for e in breakdown(t, Metric.LATENCY, StackLevel.FULL_STACK, Granularity.CATEGORY).entries:
    print(f"  {e.label:8s} {e.percent:5.1f}%")

# the receiver does most of the on-node work
print("\nOn-node time only:")
for e in breakdown(t, Metric.LATENCY, StackLevel.FULL_STACK, Granularity.ON_NODE).entries:
    print(f"  {e.label:10s} {e.ns:8.2f} ns  {e.percent:5.1f}%")

print("\nThe five steps of a low-level post, injection view:")
for e in breakdown(t, Metric.INJECTION, StackLevel.LLP_ONLY, split_llp_post=True).entries:
    print(f"  {e.label:14s} {e.ns:7.2f} ns  {e.percent:5.1f}%")
