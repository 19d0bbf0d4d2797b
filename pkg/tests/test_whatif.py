import dataclasses

import pytest
from hypothesis import given, strategies as st

from commbreak import model, whatif
from commbreak.model import Metric as M, StackLevel as L
from commbreak.timings import ComponentTimings
from commbreak.whatif import OptimizationTarget as T

from conftest import timings

fractions = st.integers(0, 100).map(lambda x: x / 100)


def pct(t, target, fraction, metric, level=L.FULL_STACK):
    return whatif.sweep(t, [target], [fraction], metric, level)[0].percent_reduction


def test_targets_are_exact():
    assert {x.value for x in T} == {
        "pio_copy", "llp_post_all", "llp_all", "hlp_all", "hlp_tx_prog", "hlp_rx_prog", "pcie",
        "rc_to_mem", "io_all", "wire", "switch", "network_all",
    }
    assert set(whatif.TARGET_FIELDS) == set(T)


def test_pio_reduction(measured):
    assert whatif.apply_reduction(measured, T.PIO_COPY, 0.84).llp_post.pio_copy == pytest.approx(15.08)


def test_identity_and_full_reduction(measured):
    assert whatif.apply_reduction(measured, T.IO_ALL, 0.0) == measured
    gone = whatif.apply_reduction(measured, T.IO_ALL, 1.0)
    assert gone.io_net.pcie == 0 and set(gone.io_net.rc_to_mem.values()) == {0}
    assert gone.io_net.wire == measured.io_net.wire
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            whatif.apply_reduction(measured, T.PCIE, bad)


def test_claims(measured):
    assert pct(measured, T.PIO_COPY, 0.84, M.INJECTION) == pytest.approx(29.88, abs=0.01)
    assert pct(measured, T.PIO_COPY, 0.84, M.LATENCY) >= 5
    assert pct(measured, T.IO_ALL, 0.5, M.LATENCY) == pytest.approx(50 * 515.94 / 1387.02, abs=1e-9)
    assert pct(measured, T.SWITCH, 1 - 30 / 108, M.LATENCY) == pytest.approx(5.45, abs=1.0)
    assert pct(measured, T.HLP_ALL, 0.2, M.INJECTION) == pytest.approx(6.44, abs=1.0)
    assert pct(measured, T.LLP_ALL, 0.2, M.INJECTION) == pytest.approx(13.33, abs=1.0)


def test_sweep_shape_and_defaults(measured):
    points = whatif.sweep(measured, [T.PCIE, T.WIRE])
    assert [(p.target, p.reduction_fraction) for p in points] == [
        (t, f) for t in (T.PCIE, T.WIRE) for f in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(p.baseline == pytest.approx(264.97) for p in points)


def test_point_invariants(measured):
    for p in whatif.sweep(measured, list(T), metric=M.LATENCY):
        assert p.speedup_ratio == pytest.approx(p.baseline / p.optimized)
        assert p.percent_reduction == pytest.approx(100 * (p.baseline - p.optimized) / p.baseline)
        assert p.speedup_ratio >= 1 and 0 <= p.percent_reduction <= 100


def test_csv_and_gnuplot(measured):
    points = whatif.sweep(measured, [T.PIO_COPY, T.SWITCH], [0.5])
    lines = whatif.sweep_csv(points).splitlines()
    assert lines[0] == "target,fraction,metric,level,baseline_ns,optimized_ns,speedup_ratio,percent_reduction"
    assert lines[1].startswith("pio_copy,0.5,injection,full_stack,264.970000,")
    blocks = whatif.sweep_gnuplot(points).split("\n\n\n")
    assert len(blocks) == 2 and blocks[1].startswith("# switch")


@pytest.mark.parametrize("metric, level", [(M.INJECTION, L.LLP_ONLY), (M.INJECTION, L.FULL_STACK),
                                           (M.LATENCY, L.LLP_ONLY)])
def test_simulator_confirms_sweep(measured, metric, level):
    for p in whatif.sweep(measured, [T.PIO_COPY, T.LLP_ALL], [0.5], metric, level, confirm_with_simulator=True):
        assert p.simulated == pytest.approx(p.optimized, rel=0.01)


@given(timings(), st.sampled_from(list(T)), st.sampled_from(list(M)), st.sampled_from(list(L)))
def test_affine_in_fraction(t, target, metric, level):
    y = [p.optimized for p in whatif.sweep(t, [target], [0.0, 0.5, 1.0], metric, level)]
    assert y[1] == pytest.approx((y[0] + y[2]) / 2, abs=1e-9)


@given(timings(), st.sampled_from(list(T)), st.sampled_from(list(M)), fractions, fractions)
def test_monotone_in_fraction(t, target, metric, a, b):
    lo, hi = sorted((a, b))
    assert pct(t, target, lo, metric) <= pct(t, target, hi, metric) + 1e-9


@given(timings(), st.sampled_from(list(T)), st.sampled_from(list(M)), fractions)
def test_zero_weight_target_is_neutral(t, target, metric, fraction):
    zeroed = whatif.apply_reduction(t, target, 1.0)
    p = whatif.sweep(zeroed, [target], [fraction], metric)[0]
    if p.baseline > 0:
        assert p.speedup_ratio == 1.0 and p.percent_reduction == 0.0


@given(timings(), st.sampled_from(list(M)), st.sampled_from(list(L)), fractions)
def test_hlp_all_dominates_parts(t, metric, level, fraction):
    best = pct(t, T.HLP_ALL, fraction, metric, level)
    for part in (T.HLP_TX_PROG, T.HLP_RX_PROG):
        assert best >= pct(t, part, fraction, metric, level) - 1e-9


def _flatten(t):
    out = {("top", "llp_prog"): t.llp_prog}
    for section in ("llp_post", "misc", "hlp", "io_net"):
        obj = getattr(t, section)
        out.update({(section, f.name): getattr(obj, f.name) for f in dataclasses.fields(obj)})
    return out


@given(timings(lo=0.01), st.sampled_from(list(T)), st.integers(1, 100).map(lambda x: x / 100))
def test_only_target_fields_change(t, target, fraction):
    before, after = _flatten(t), _flatten(whatif.apply_reduction(t, target, fraction))
    touched = {k for k in before if after[k] != before[k]}
    allowed = {(section, name) for section, names in whatif.TARGET_FIELDS[target].items() for name in names}
    assert touched == allowed


def test_all_zero_timings_are_neutral():
    p = whatif.sweep(ComponentTimings(), [T.LLP_ALL], [0.5])[0]
    assert p.speedup_ratio == 1.0 and p.percent_reduction == 0.0
