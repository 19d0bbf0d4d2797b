import dataclasses
import json
import math

import pytest
from hypothesis import given, strategies as st

from commbreak import model
from commbreak.model import Granularity as G, Metric as M, ModelError, StackLevel as L
from commbreak.timings import ComponentTimings, IoNetworkTimings, iter_duration_fields, with_field

from conftest import durations, timings

ZERO = ComponentTimings()
LEVELS = list(L)


def test_gen_completion(measured):
    # 2 * (pcie + network) + rc_to_mem[64], the 64-byte write falling back to the 8-byte one
    assert model.gen_completion(measured) == pytest.approx(2 * (137.49 + 382.81) + 240.96, abs=1e-9)
    assert model.gen_completion(measured) == pytest.approx(1281.56, abs=1e-9)
    assert model.gen_completion(ZERO) == 0
    t = dataclasses.replace(ZERO, io_net=IoNetworkTimings(pcie=1, wire=1, switch=0, rc_to_mem={64: 1}))
    assert model.gen_completion(t) == 5


def test_min_poll_interval(measured):
    assert model.min_poll_interval(measured) == math.ceil(1281.56 / 175.42) == 8
    post_only = with_field(ZERO, "llp_post.pio_copy", 5.0)
    assert model.min_poll_interval(post_only) == 1
    equal = with_field(with_field(post_only, "io.pcie", 1.0), "net.wire", 1.5)
    assert model.gen_completion(equal) == 5.0 and model.min_poll_interval(equal) == 1
    with pytest.raises(ModelError):
        model.min_poll_interval(ZERO)


def test_injection_values(measured):
    assert model.cpu_time(measured, L.LLP_ONLY) == pytest.approx(175.42 + 61.63 + 58.68, abs=1e-9)
    assert model.inj_overhead(measured, L.LLP_ONLY) == pytest.approx(295.73, abs=0.01)
    assert model.inj_overhead(measured, L.FULL_STACK) == pytest.approx(201.98 + 59.82 + 3.17, abs=1e-9)
    assert model.inj_overhead(measured, L.FULL_STACK) == pytest.approx(264.97, abs=0.01)
    assert model.msg_inj_overhead(measured) == pytest.approx(433.22, abs=1e-9)
    for level in LEVELS:
        assert model.inj_overhead(ZERO, level) == 0 and model.msg_inj_overhead(ZERO, level) == 0


def test_latency_values(measured):
    assert model.latency(measured, L.LLP_ONLY, 8) == pytest.approx(1135.80, abs=0.01)
    assert model.latency(measured, L.FULL_STACK, 8) == pytest.approx(1387.02, abs=0.01)
    assert model.latency(ZERO, L.FULL_STACK) == 0


def test_relative_error():
    assert model.relative_error(295.73, 282.33) == pytest.approx(0.0475, abs=5e-5)
    assert model.relative_error(1135.80, 1190.25) == pytest.approx(0.0457, abs=5e-4)
    assert model.relative_error(7.0, 7.0) == 0
    with pytest.raises(ModelError):
        model.relative_error(1.0, 0.0)


def test_category_breakdown_percentages(measured):
    r = model.breakdown(measured, M.LATENCY, L.FULL_STACK, G.CATEGORY)
    assert r.percent("Network") == pytest.approx(100 * 382.81 / 1387.02, abs=1e-9)
    assert round(r.percent("Network"), 1) == 27.6
    assert round(r.percent("CPU") + r.percent("I/O"), 1) == 72.4


def test_on_node_target_dominates(measured):
    r = model.breakdown(measured, M.LATENCY, L.FULL_STACK, G.ON_NODE)
    assert [e.label for e in r.entries] == ["Initiator", "Target"]
    assert r.percent("Target") > r.percent("Initiator")
    # network is excluded from the on-node view
    assert r.total == pytest.approx(1387.02 - 382.81, abs=1e-9)
    with pytest.raises(ModelError):
        model.breakdown(measured, M.INJECTION, L.LLP_ONLY, G.ON_NODE)


def test_fine_entry_order(measured):
    labels = [e.label for e in model.breakdown(measured, M.LATENCY, L.FULL_STACK).entries]
    assert labels == ["HLP_post", "LLP_post", "PCIe", "Network", "RCtoMem[8]", "LLP_prog", "HLP_rx_prog"]
    split = model.breakdown(measured, M.INJECTION, L.LLP_ONLY, split_llp_post=True)
    assert [e.label for e in split.entries][:5] == ["MD setup", "MD barrier", "DBC barrier", "PIO copy",
                                                    "LLP_post misc"]
    assert split.total == pytest.approx(295.73, abs=1e-9)


def test_single_component_is_everything():
    t = with_field(ZERO, "net.wire", 10.0)
    r = model.breakdown(t, M.LATENCY, L.LLP_ONLY)
    assert r.percent("Network") == 100.0
    assert sum(e.percent for e in r.entries) == 100.0


def test_zero_total_gives_zero_percents():
    r = model.breakdown(ZERO, M.LATENCY, L.LLP_ONLY, G.CATEGORY)
    assert all(e.percent == 0 for e in r.entries)


def test_serialization(measured):
    r = model.breakdown(measured, M.LATENCY, L.LLP_ONLY, G.CATEGORY)
    lines = r.to_csv().splitlines()
    assert lines[0] == "label,ns,percent"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["CPU", "I/O", "Network"]
    data = json.loads(r.to_json())
    assert data["total_ns"] == r.total and [e["label"] for e in data["entries"]] == ["CPU", "I/O", "Network"]


@given(timings(), st.sampled_from(list(M)), st.sampled_from(LEVELS))
def test_fine_breakdown_is_additive(t, metric, level):
    r = model.breakdown(t, metric, level, G.FINE)
    value = model.inj_overhead(t, level) if metric is M.INJECTION else model.latency(t, level)
    assert r.total == value
    assert sum(e.ns for e in r.entries) == pytest.approx(value, abs=1e-9)
    assert all(e.ns >= 0 for e in r.entries)
    if value > 0:
        assert sum(e.percent for e in r.entries) == pytest.approx(100, abs=1e-9)


@given(timings(), st.sampled_from(list(M)), st.sampled_from(LEVELS))
def test_category_entries_are_sums_of_fine_entries(t, metric, level):
    fine = model.breakdown(t, metric, level, G.FINE).as_dict()
    cat = model.breakdown(t, metric, level, G.CATEGORY).as_dict()
    io = sum(v for k, v in fine.items() if k == "PCIe" or k.startswith("RCtoMem"))
    net = fine.get("Network", 0.0)
    cpu = sum(fine.values()) - io - net
    assert cat["I/O"] == pytest.approx(io, abs=1e-9)
    assert cat["Network"] == pytest.approx(net, abs=1e-9)
    assert cat["CPU"] == pytest.approx(cpu, abs=1e-9)


FIELDS = [k for k, _ in iter_duration_fields(ComponentTimings(io_net=IoNetworkTimings(rc_to_mem={8: 0, 64: 0})))]


@given(timings(), st.sampled_from(FIELDS), durations(0.01, 100))
def test_monotone_in_every_field(t, key, bump):
    before = dict(iter_duration_fields(t))[key]
    u = with_field(t, key, before + bump)
    for level in LEVELS:
        assert model.inj_overhead(u, level) >= model.inj_overhead(t, level)
        assert model.latency(u, level) >= model.latency(t, level)
        assert model.gen_completion(u) >= model.gen_completion(t)


IO_FIELDS = ["io.pcie", "net.wire", "net.switch", "io.rc_to_mem.8", "io.rc_to_mem.64"]


@given(timings(), st.sampled_from(IO_FIELDS), durations())
def test_injection_ignores_io_and_network(t, key, value):
    u = with_field(t, key, value)
    for level in LEVELS:
        assert model.inj_overhead(u, level) == model.inj_overhead(t, level)


def _without_hlp(t):
    hlp = type(t.hlp)()
    misc = dataclasses.replace(t.misc, per_msg_misc_full=t.misc_inj_total())
    return dataclasses.replace(t, hlp=hlp, misc=misc)


@given(timings())
def test_levels_agree_without_hlp(t):
    t = _without_hlp(t)
    assert model.latency(t, L.FULL_STACK) == model.latency(t, L.LLP_ONLY)
    # the full stack charges send progress to the HLP, so LLP_prog is the only difference
    assert model.inj_overhead(t, L.FULL_STACK) == pytest.approx(
        model.inj_overhead(t, L.LLP_ONLY) - t.llp_prog, abs=1e-9)


@given(timings())
def test_full_stack_latency_not_below_llp(t):
    assert model.latency(t, L.FULL_STACK) >= model.latency(t, L.LLP_ONLY)
