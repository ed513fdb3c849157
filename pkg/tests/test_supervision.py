import math

import pytest
from hypothesis import given, settings, strategies as st

from studd import ValidationError
from studd.drift import DriftStatus, PageHinkley
from studd.supervision import (LabelOracle, MethodKind, label_availability, oracle_observe,
                               oracle_poll, supervised_error_step)


def test_method_kinds():
    assert {m.value for m in MethodKind} == {"bl-st", "bl-ret", "ss", "ws", "dss", "dws", "os",
                                             "of", "ff", "studd"}
    assert [m for m in MethodKind if m.supervised] == [MethodKind.SS, MethodKind.WS,
                                                       MethodKind.DSS, MethodKind.DWS]
    assert MethodKind("studd").label == "STUDD" and MethodKind.BL_ST.label == "BL-st"


def test_label_availability():
    assert label_availability("ss", 10, 500) == (100.0, 0)
    assert label_availability("ws", 10, 500) == (10.0, 0)
    assert label_availability("dss", 10, 500) == (100.0, 500)
    assert label_availability("dws", 10, 500) == (10.0, 500)


def test_full_immediate_supervision_returns_own_label():
    o = LabelOracle(100, 0, seed=1)
    for t in range(1, 50):
        oracle_observe(o, t, t % 3)
        assert oracle_poll(o, t) == [(t, t % 3)]
    assert o.labels_dispensed == 49 and o.n_pending == 0


def test_delay_shifts_due_time():
    o = LabelOracle(100, 500)
    o.observe(1, "a")
    assert o.poll(500) == []
    assert o.poll(501) == [(1, "a")]


def test_late_poll_returns_in_due_then_index_order():
    o = LabelOracle(100, 3)
    for t in range(1, 6):
        o.observe(t, t)
    assert o.poll(3) == []
    assert [i for i, _ in o.poll(100)] == [1, 2, 3, 4, 5]
    assert [a.time for a in o.accesses] == [100] * 5
    assert all(a.kind == "monitor" for a in o.accesses)


def test_rare_access_count_within_three_sigma():
    n, p = 100_000, 0.01
    sigma = math.sqrt(n * p * (1 - p))        # 31.46
    o = LabelOracle(1, 0, seed=0)
    for t in range(1, n + 1):
        o.observe(t, 0)
    assert abs(len(o.poll(n)) - n * p) <= 3 * sigma


def test_time_must_increase():
    o = LabelOracle()
    o.observe(5, 0)
    with pytest.raises(ValidationError):
        o.observe(5, 0)
    o.poll(10)
    with pytest.raises(ValidationError):
        o.poll(9)


def test_parameter_validation():
    for bad in [dict(l_access=0), dict(l_access=101), dict(l_delay=-1)]:
        with pytest.raises(ValidationError):
            LabelOracle(**bad)


@given(st.floats(0.5, 100), st.integers(0, 30), st.integers(0, 2**32 - 1),
       st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_oracle_replay_and_bounds(access, delay, seed, n):
    def run():
        o = LabelOracle(access, delay, seed)
        got = []
        for t in range(1, n + 1):
            o.observe(t, t * 7)
            got.extend(o.poll(t))
        got.extend(o.poll(n + delay))
        return got, o
    a, oracle = run()
    b, _ = run()
    assert a == b
    assert len(a) <= n and len({i for i, _ in a}) == len(a)
    assert all(label == i * 7 for i, label in a)
    assert [i for i, _ in a] == sorted(i for i, _ in a)
    if access == 100:
        assert len(a) == n
    assert oracle.labels_dispensed == len(a)


def test_request_batch_is_logged_and_counted():
    o = LabelOracle()
    labels = o.request_batch(range(1, 4), [1, 0, 1], t=3)
    assert labels.tolist() == [1, 0, 1]
    assert o.labels_requested == 3 and o.labels_used == 3
    assert [(a.kind, a.index, a.time) for a in o.accesses] == [("batch", i, 3) for i in (1, 2, 3)]
    with pytest.raises(ValidationError):
        o.request_batch([1, 2], [0], t=4)


def test_supervised_error_step():
    ph = PageHinkley()
    assert supervised_error_step((1, "b"), {1: "a"}, ph) is DriftStatus.NO_CHANGE
    assert (ph.count, ph.running_mean) == (1, 1.0)
    supervised_error_step((2, "a"), {2: "a"}, ph)
    assert ph.running_mean == 0.5
    with pytest.raises(ValidationError):
        supervised_error_step((3, "a"), {2: "a"}, ph)


def test_perfect_predictions_never_alarm():
    ph = PageHinkley(lambda_threshold=1.0)
    log = {t: t % 2 for t in range(1, 2001)}
    assert all(supervised_error_step((t, t % 2), log, ph) is DriftStatus.NO_CHANGE
               for t in range(1, 2001))
