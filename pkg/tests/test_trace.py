import dataclasses

import pytest
from hypothesis import given, strategies as st

from commbreak import simulator, trace
from commbreak.model import StackLevel as L
from commbreak.timings import PipelineConfig, WorkloadMode, with_field
from commbreak.trace import EstimationError, TraceError, TraceRecord as R

from conftest import timings

HEADER = ",".join(trace.TRACE_HEADER)
PINGPONG = PipelineConfig(workload_mode=WorkloadMode.LLP_PINGPONG)


def ns(x):
    return int(round(x * 1000))


def pio(t_ns, tag=None):
    return R(ns(t_ns), "down", "MWr", 64, tag)


def test_header_is_exact():
    assert HEADER == "timestamp_ns,direction,tlp_type,payload_bytes,tag"


def test_parse_header_only():
    assert trace.parse_trace(HEADER + "\n") == []


def test_parse_one_row():
    recs = trace.parse_trace(HEADER + "\n12.345,up,MWr,64,cqe\n")
    assert recs == [R(12345, "up", "MWr", 64, "cqe")]
    assert recs[0].time_ns == 12.345


def test_parse_empty_tag_and_sorting():
    recs = trace.parse_trace(HEADER + "\n5,down,ACK,0,\n1.5,up,MWr,8,\n")
    assert [r.timestamp for r in recs] == [1500, 5000]
    assert recs[0].tag is None


@pytest.mark.parametrize("body", [
    "1.2345,up,MWr,64,",        # too many fractional digits
    "-1,up,MWr,64,",
    "1,sideways,MWr,64,",
    "1,up,MRead,64,",
    "1,up,MWr,-3,",
    "1,down,ACK,4,",            # DLLPs carry no payload
    "1,up,MWr",
    "abc,up,MWr,64,",
])
def test_parse_rejects_bad_rows(body):
    with pytest.raises(TraceError) as exc:
        trace.parse_trace(HEADER + "\n" + body + "\n")
    assert exc.value.lineno == 2


def test_parse_rejects_wrong_header():
    with pytest.raises(TraceError):
        trace.parse_trace("time,dir\n")


def test_interval_stats_uniform():
    s = trace.injection_interval_stats([pio(0), pio(100), pio(200)])
    assert (s.mean, s.median, s.count) == (100, 100, 2)


def test_interval_stats_hand_computed():
    s = trace.injection_interval_stats([pio(0), pio(100), pio(300)])
    assert (s.mean, s.median, s.min, s.max) == (150, 150, 100, 200)
    assert s.min <= s.p25 <= s.median <= s.p75 <= s.max


def test_interval_stats_groups_chunks():
    recs = [pio(0), pio(2), pio(4), pio(100), pio(103), pio(300)]
    s = trace.injection_interval_stats(recs)
    assert (s.count, s.mean) == (2, 150)
    assert trace.injection_interval_stats(recs, chunk_gap_ns=1).count == 5


def test_interval_stats_needs_two_posts():
    with pytest.raises(EstimationError):
        trace.injection_interval_stats([pio(0)])


def test_interval_stats_of_simulated_putbw(measured):
    cfg = PipelineConfig(poll_interval_p=16, txq_depth=64)
    r = simulator.simulate_injection(measured, cfg, 10_000)
    s = trace.injection_interval_stats(simulator.synth_trace(r, cfg))
    assert s.mean == pytest.approx(295.73, rel=0.01)


def test_estimate_pcie():
    assert trace.estimate_pcie([R(0, "up", "MWr", 64), R(ns(274.98), "down", "ACK")]) == pytest.approx(137.49)
    assert trace.estimate_pcie([R(7, "up", "MWr", 64), R(7, "down", "ACK")]) == 0
    with pytest.raises(EstimationError):
        trace.estimate_pcie([R(0, "down", "ACK")])


def test_estimate_pcie_warns_on_overlap():
    recs = [R(0, "up", "MWr", 64), R(10_000, "up", "MWr", 64), R(20_000, "down", "ACK"), R(30_000, "down", "ACK")]
    with pytest.warns(UserWarning, match="1 of 2"):
        assert trace.estimate_pcie(recs) == pytest.approx(10.0)


def test_estimate_network():
    assert trace.estimate_network([pio(0), R(ns(765.62), "up", "MWr", 64)]) == pytest.approx(382.81)
    assert trace.estimate_network([pio(5), R(ns(5), "up", "MWr", 64)]) == 0
    with pytest.raises(EstimationError):
        trace.estimate_network([pio(0), pio(500)])


def test_estimate_rc_to_mem():
    recs = [R(0, "up", "MWr", 8), pio(752.99)]
    assert trace.estimate_rc_to_mem(recs, 137.49, 175.42, 61.63, 8) == pytest.approx(240.96, abs=1e-9)
    exact = [R(0, "up", "MWr", 8), pio(10 + 2 + 3)]
    assert trace.estimate_rc_to_mem(exact, 5.0, 3.0, 2.0) == pytest.approx(0, abs=1e-9)
    with pytest.raises(EstimationError, match="negative"):
        trace.estimate_rc_to_mem(recs, 400.0, 175.42, 61.63)
    with pytest.raises(EstimationError):
        trace.estimate_rc_to_mem(recs, 1.0, 1.0, 1.0, msg_size=16)


def test_estimate_switch(measured):
    assert trace.estimate_switch(1243.8, 1135.8) == pytest.approx(108)
    assert trace.estimate_switch(5.0, 5.0) == 0
    with pytest.raises(EstimationError):
        trace.estimate_switch(100.0, 200.0)
    with pytest.raises(EstimationError):
        trace.estimate_switch(0.0, 1.0)
    direct = dataclasses.replace(measured, io_net=dataclasses.replace(measured.io_net, has_switch=False))
    lat = lambda t: simulator.simulate_pingpong(t, PINGPONG, 3).mean_latency()
    assert trace.estimate_switch(lat(measured), lat(direct)) == pytest.approx(108.0, abs=0.01)


def test_round_trip_through_simulator(measured):
    r = simulator.simulate_pingpong(measured, PINGPONG, 10)
    recs = trace.parse_trace(trace.serialize_trace(simulator.synth_trace(r, PINGPONG)))
    assert recs == simulator.synth_trace(r, PINGPONG)
    assert trace.estimate_pcie(recs) == pytest.approx(137.49, abs=0.01)
    assert trace.estimate_network(recs) == pytest.approx(382.81, abs=0.01)
    assert trace.estimate_rc_to_mem(recs, 137.49, 175.42, 61.63) == pytest.approx(240.96, abs=0.01)


@given(timings(lo=0.01, hi=400))
def test_estimators_recover_simulated_timings(t):
    # the 64-byte completion write must not outrun the next ping
    t = with_field(t, "io.rc_to_mem.64", t.rc_to_mem(8))
    r = simulator.simulate_pingpong(t, PINGPONG, 4, L.LLP_ONLY)
    recs = simulator.synth_trace(r, PINGPONG)
    assert trace.estimate_pcie(recs) == pytest.approx(t.io_net.pcie, abs=0.01)
    assert trace.estimate_network(recs) == pytest.approx(t.network_total(), abs=0.01)
    assert trace.estimate_rc_to_mem(recs, t.io_net.pcie, t.llp_post_total(), t.llp_prog) == pytest.approx(
        t.rc_to_mem(8), abs=0.01)


records = st.builds(
    R,
    timestamp=st.integers(0, 10**12),
    direction=st.sampled_from(sorted(trace.DIRECTIONS)),
    kind=st.sampled_from(["MWr", "MRd", "CplD"]),
    payload_bytes=st.integers(0, 4096),
    tag=st.one_of(st.none(), st.text(alphabet="abcxyz_019", min_size=1, max_size=8)),
)
dllps = st.builds(R, timestamp=st.integers(0, 10**12), direction=st.sampled_from(sorted(trace.DIRECTIONS)),
                  kind=st.sampled_from(["ACK", "UpdateFC"]))


@given(st.lists(st.one_of(records, dllps), max_size=40))
def test_serialize_parse_round_trip(recs):
    ordered = sorted(recs, key=lambda r: r.timestamp)
    assert trace.parse_trace(trace.serialize_trace(ordered)) == ordered


@given(st.lists(st.integers(10_000, 1_000_000), min_size=1, max_size=30),
       st.lists(st.one_of(records, dllps), max_size=30))
def test_interval_stats_ignore_unrelated_records(gaps, noise):
    posts, now = [pio(0)], 0
    for g in gaps:
        now += g
        posts.append(R(now, "down", "MWr", 64))
    unrelated = [r for r in noise if not (r.direction == "down" and r.kind == "MWr" and r.payload_bytes == 64)]
    mixed = sorted(posts + unrelated, key=lambda r: r.timestamp)
    assert trace.injection_interval_stats(mixed) == trace.injection_interval_stats(posts)


def test_record_validation():
    with pytest.raises(TraceError):
        R(-1, "up", "MWr", 8)
    with pytest.raises(TraceError):
        R(0, "up", "ACK", 8)
