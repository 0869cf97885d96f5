"""Domain-type contracts: traces, groups, schedules, averaging."""

import numpy as np
import pytest

from circatrack import (
    ActivityTrace,
    DataError,
    LightSchedule,
    TraceGroup,
    average_traces,
    light_at,
    light_profile,
)

from conftest import T0


def test_trace_grid_and_durations():
    tr = ActivityTrace(channel_id="a", t0=T0, bin_minutes=30, values=np.arange(48.0))
    assert tr.n_bins == 48
    assert tr.dt_h == 0.5
    assert tr.duration_hours == 24.0
    assert tr.times_h()[0] == 0.5 and tr.times_h()[-1] == 24.0
    assert np.allclose(tr.centers_h(), tr.times_h() - 0.25)


def test_trace_values_are_readonly():
    tr = ActivityTrace(channel_id="a", t0=T0, bin_minutes=1, values=[1.0, 2.0])
    with pytest.raises(ValueError):
        tr.values[0] = 99.0


def test_trace_rejects_bad_shapes():
    with pytest.raises(DataError):
        ActivityTrace(channel_id="a", t0=T0, bin_minutes=1, values=[[1.0, 2.0]])
    with pytest.raises(DataError):
        ActivityTrace(channel_id="a", t0=T0, bin_minutes=0, values=[1.0])
    with pytest.raises(DataError):
        ActivityTrace(channel_id="a", t0=T0, bin_minutes=1, values=[])


def test_with_values_keeps_grid():
    tr = ActivityTrace(channel_id="a", t0=T0, bin_minutes=5, values=[1.0, 2.0])
    tr2 = tr.with_values([3.0, 4.0], channel_id="b")
    assert tr2.bin_minutes == 5 and tr2.t0 == tr.t0
    assert tr2.channel_id == "b"
    assert list(tr2.values) == [3.0, 4.0]


def test_group_requires_common_grid():
    a = ActivityTrace(channel_id="a", t0=T0, bin_minutes=1, values=[1.0, 2.0])
    b = ActivityTrace(channel_id="b", t0=T0, bin_minutes=1, values=[1.0, 2.0, 3.0])
    with pytest.raises(DataError):
        TraceGroup(traces=(a, b))
    c = ActivityTrace(channel_id="c", t0=T0, bin_minutes=2, values=[1.0, 2.0])
    with pytest.raises(DataError):
        TraceGroup(traces=(a, c))


def test_group_subset_and_matrix():
    traces = tuple(
        ActivityTrace(channel_id=f"ch{i}", t0=T0, bin_minutes=1, values=[float(i)] * 3)
        for i in range(4)
    )
    group = TraceGroup(traces=traces, label="g")
    sub = group.subset(["ch1", "ch3"])
    assert sub.channel_ids() == ["ch1", "ch3"]
    assert sub.label == "g"
    assert group.matrix().shape == (4, 3)
    assert np.allclose(group.matrix()[:, 0], [0.0, 1.0, 2.0, 3.0])


def test_average_traces_population_sd():
    a = ActivityTrace(channel_id="a", t0=T0, bin_minutes=1, values=[0.0, 2.0])
    b = ActivityTrace(channel_id="b", t0=T0, bin_minutes=1, values=[4.0, 2.0])
    mean, sd = average_traces(TraceGroup(traces=(a, b), label="g"))
    assert np.allclose(mean.values, [2.0, 2.0])
    assert np.allclose(sd.values, [2.0, 0.0])  # divide by n, not n-1


def test_light_schedule_validation_and_lookup():
    sched = LightSchedule(intervals=((0.0, 12.0, 100.0, "white"),
                                     (24.0, 36.0, 100.0, "white")))
    assert light_at(sched, 0.0) == 100.0
    assert light_at(sched, 12.0) == 0.0  # half-open
    assert light_at(sched, 30.0) == 100.0
    prof = light_profile(sched, np.array([6.0, 18.0, 24.0]))
    assert list(prof) == [100.0, 0.0, 100.0]
    with pytest.raises(DataError):
        LightSchedule(intervals=((12.0, 12.0, 100.0, "white"),))
    with pytest.raises(DataError):
        LightSchedule(intervals=((0.0, 12.0, -1.0, "white"),))
    with pytest.raises(DataError):
        LightSchedule(intervals=((0.0, 12.0, 100.0, "w"), (6.0, 18.0, 100.0, "w")))


def test_light_schedule_edges_sorted():
    sched = LightSchedule(intervals=((0.0, 12.0, 100.0, "w"), (24.0, 36.0, 50.0, "w")))
    assert sched.edges() == [0.0, 12.0, 24.0, 36.0]
