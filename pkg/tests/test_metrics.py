import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maibl.metrics import (
    METRICS,
    EpisodeTrace,
    RunSummary,
    aggregate,
    efficiency,
    episode_series,
    moving_average,
    pcoordinate,
    pmax,
    running_mean,
    step_metrics,
    summarize_run,
    trace_from_events,
)
from oracles import naive_metrics


def tr(zone, steps=100, arrivals=(10, 10), joint=5, carry=10, reward=0.8, ep=0):
    return EpisodeTrace(ep, steps, zone, reward if zone else 0.0, arrivals, joint, carry)


def test_pmax_examples():
    assert pmax([tr(0, carry=0, joint=0)] * 5, 1) == 0
    assert pmax([tr(1)] * 1000, 1) == 1
    traces = [tr(1)] * 801 + [tr(2)] * 199
    assert pmax(traces, 1) == 0.801
    with pytest.raises(ValueError):
        pmax([], 1)


def test_pcoordinate_examples():
    assert pcoordinate([tr(1, joint=7, carry=7)] * 3, 1) == pmax([tr(1)] * 3, 1)
    assert pcoordinate([tr(2)] * 3, 1) == 0
    traces = [tr(1, joint=5, carry=10), tr(1, joint=1, carry=4), tr(2), tr(0, carry=0, joint=0)]
    assert pcoordinate(traces, 1) == 0.1875


def test_efficiency_examples():
    assert efficiency([tr(2)] * 4, 1, 0.99, 0.8) == 0
    traces = [tr(1, steps=100), tr(2), tr(2), tr(0, carry=0, joint=0)]
    # 0.99**100 / 4, frozen from mpmath
    assert efficiency(traces, 1, 0.99, 0.8) == pytest.approx(0.0915080853183073762, abs=1e-15)
    assert efficiency([tr(1), tr(2)], 1, 1.0, 0.8) == pmax([tr(1), tr(2)], 1)
    with pytest.raises(ValueError):
        efficiency([tr(1)], 1, 0.99, 0.0)


def test_step_metrics_examples():
    assert step_metrics([tr(1, arrivals=(10, 10))], 1)[1:] == (10, 0)
    assert step_metrics([tr(1, arrivals=(10, 25))], 1)[1:] == (25, 15)
    assert step_metrics([tr(1, steps=300), tr(1, steps=350), tr(2, steps=5, joint=1, carry=2)], 1)[0] == 325
    assert all(math.isnan(v) for v in step_metrics([tr(2)], 1))


def test_trace_invariants():
    with pytest.raises(ValueError):
        EpisodeTrace(0, 10, 0, 0.0, (0, 0), 5, 4)
    with pytest.raises(ValueError):
        EpisodeTrace(0, 10, 0, 0.0, (0, 0), 0, 11)
    with pytest.raises(ValueError):
        EpisodeTrace(0, 10, 1, 0.8, (0, 0), 0, 0)


def test_trace_record_round_trip():
    t = tr(1, arrivals=(3, 9))
    assert EpisodeTrace.from_record(t.to_record()) == t


def test_aggregate_examples():
    one = aggregate([RunSummary(0.5, 0.1, 0.1, 100, 20, 5)])
    assert all(row.std == 0 for row in one)
    rows = {r.metric: r for r in aggregate([RunSummary(0.8, 0, 0, 1, 1, 1), RunSummary(0.6, 0, 0, 3, 1, 1)])}
    assert rows["pmax"].mean == pytest.approx(0.7, abs=1e-15)
    assert rows["pmax"].std == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_excludes_nan_runs():
    nan = math.nan
    rows = {r.metric: r for r in aggregate([RunSummary(0, 0, 0, nan, nan, nan), RunSummary(0.5, 0.2, 0.1, 10, 4, 2)])}
    assert rows["step"].mean == 10 and rows["step"].runs == 1 and rows["step"].excluded == 1
    assert rows["pmax"].runs == 2 and rows["pmax"].excluded == 0


def test_aggregate_order_independent():
    rng = random.Random(0)
    runs = [RunSummary(*(rng.random() for _ in METRICS)) for _ in range(7)]
    a = aggregate(runs)
    shuffled = runs[:]
    rng.shuffle(shuffled)
    b = aggregate(shuffled)
    for x, y in zip(a, b):
        assert x.mean == pytest.approx(y.mean, abs=1e-15)
        assert x.std == pytest.approx(y.std, abs=1e-15)


def random_episode(rng, optimal_zone):
    """A synthetic per-step event log obeying the environment's phase structure."""
    length = rng.randint(1, 60)
    pickup_at = rng.randint(1, length + 3)  # may never happen
    delivered = pickup_at < length and rng.random() < 0.8
    events = []
    for i in range(1, length + 1):
        carrying = i > pickup_at
        ev = {
            "carrying": carrying,
            "joint_move": carrying and rng.random() < 0.5,
            "pickup": i == pickup_at,
            "moved": [rng.random() < 0.5, rng.random() < 0.5] if not carrying else [False, False],
            "zone": 0,
            "reward": 0.0,
        }
        if carrying and ev["joint_move"]:
            ev["moved"] = [True, True]
        events.append(ev)
    if delivered:
        last = events[-1]
        last["joint_move"] = True
        last["moved"] = [True, True]
        last["zone"] = rng.choice([optimal_zone, 3 - optimal_zone])
        last["reward"] = rng.choice([0.0, 0.4, 0.8, 1.0, 7.0])
    return events


def test_metric_oracle_random_sets():
    rng = random.Random(2024)
    for _ in range(100):
        opt = rng.choice([1, 2])
        gamma = rng.choice([0.9, 0.99, 1.0])
        R = rng.choice([0.8, 3.2])
        episodes = [random_episode(rng, opt) for _ in range(rng.randint(1, 40))]
        traces = [trace_from_events(i, ev) for i, ev in enumerate(episodes)]
        got = summarize_run(traces, opt, gamma, R).as_dict()
        want = naive_metrics(episodes, opt, gamma, R)
        for m in METRICS:
            if math.isnan(want[m]):
                assert math.isnan(got[m])
            else:
                assert got[m] == pytest.approx(want[m], abs=1e-12, rel=0)
        assert got["pcoordinate"] <= got["pmax"]
        if not math.isnan(got["dstep"]):
            assert got["dstep"] <= got["mstep"]


@given(st.lists(st.tuples(st.sampled_from([0, 1, 2]), st.integers(1, 500), st.integers(0, 500), st.integers(0, 500)),
                min_size=1, max_size=30))
def test_metric_bounds(rows):
    traces = []
    for i, (zone, steps, a0, a1) in enumerate(rows):
        carry = steps // 2 if zone else steps // 3
        carry = max(carry, 1) if zone else carry
        traces.append(EpisodeTrace(i, steps, zone, 3.0 if zone else 0.0, (min(a0, steps), min(a1, steps)),
                                   carry // 2, carry))
    s = summarize_run(traces, 1, 0.99, 3.2)
    assert 0 <= s.pcoordinate <= s.pmax <= 1
    assert s.efficiency <= s.pmax * 3.0 / 3.2 + 1e-12
    if not math.isnan(s.dstep):
        assert s.dstep <= s.mstep


def test_series_means_equal_run_metrics():
    rng = random.Random(7)
    episodes = [random_episode(rng, 1) for _ in range(50)]
    traces = [trace_from_events(i, ev) for i, ev in enumerate(episodes)]
    s = summarize_run(traces, 1, 0.99, 0.8)
    series = episode_series(traces, 1, 0.99, 0.8)
    for m in ("pmax", "pcoordinate", "efficiency"):
        assert series[m].mean() == pytest.approx(getattr(s, m), abs=1e-12)
    for m in ("step", "mstep", "dstep"):
        if not math.isnan(getattr(s, m)):
            assert np.nanmean(series[m]) == pytest.approx(getattr(s, m), abs=1e-12)


def test_moving_average_and_running_mean():
    x = np.arange(1.0, 101.0)
    ma = moving_average(x, 50)
    assert ma[0] == 1.0
    assert ma[49] == pytest.approx(np.mean(x[:50]))
    assert ma[99] == pytest.approx(np.mean(x[50:]))
    assert running_mean([1, 0, 1, 0]).tolist() == [1.0, 0.5, 2 / 3, 0.5]
    y = np.array([np.nan, 2.0, np.nan])
    assert moving_average(y, 2).tolist()[1:] == [2.0, 2.0]
