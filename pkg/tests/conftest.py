import pytest
from hypothesis import settings, strategies as st

from commbreak.timings import (ComponentTimings, HlpTimings, IoNetworkTimings, LlpPostBreakdown, MiscTimings,
                               default_timings)

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


def durations(lo=0.0, hi=500.0):
    # 10 ps resolution keeps values exact in the simulator's integer clock
    return st.integers(int(lo * 100), int(hi * 100)).map(lambda x: x / 100)


@st.composite
def timings(draw, lo=0.0, hi=500.0):
    d = lambda: draw(durations(lo, hi))
    return ComponentTimings(
        llp_post=LlpPostBreakdown(d(), d(), d(), d(), d()),
        llp_prog=d(),
        misc=MiscTimings(d(), d(), d()),
        hlp=HlpTimings(d(), d(), d(), d(), d(), d()),
        io_net=IoNetworkTimings(pcie=d(), wire=d(), switch=d(), rc_to_mem={8: d(), 64: d()},
                                has_switch=draw(st.booleans())),
    )


@pytest.fixture
def measured():
    return default_timings()
