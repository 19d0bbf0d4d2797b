"""What if a component got faster?

Sweeps a few optimization targets and prints how much injection overhead
and latency would shrink, then confirms one point with the simulator.
"""

from commbreak import Metric, OptimizationTarget as T, StackLevel, default_timings, sweep
from commbreak.whatif import sweep_csv

t = default_timings()

print("Cutting the PIO copy from 94 ns to about 15 ns:")
for metric in Metric:
    p = sweep(t, [T.PIO_COPY], [0.84], metric, StackLevel.FULL_STACK)[0]
    print(f"  {metric.value:9s} {p.baseline:8.2f} -> {p.optimized:8.2f} ns  "
          f"({p.percent_reduction:.1f}% less, {p.speedup_ratio:.3f}x)")

print("\nLatency gain per target at 50% reduction, full stack:")
points = sweep(t, list(T), [0.5], Metric.LATENCY, StackLevel.FULL_STACK)
for p in sorted(points, key=lambda p: -p.percent_reduction):
    print(f"  {p.target.value:13s} {p.percent_reduction:5.1f}%")

print("\nInjection sweep as CSV:")
print(sweep_csv(sweep(t, [T.HLP_ALL, T.LLP_ALL], metric=Metric.INJECTION, level=StackLevel.FULL_STACK)), end="")

p = sweep(t, [T.LLP_POST_ALL], [0.5], Metric.INJECTION, StackLevel.LLP_ONLY, confirm_with_simulator=True)[0]
print(f"\nsimulator check, llp_post_all -50%: model {p.optimized:.2f} ns, simulated {p.simulated:.2f} ns")
