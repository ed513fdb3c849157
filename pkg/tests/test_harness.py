import dataclasses

import numpy as np
import pytest

from studd import StuddError, ValidationError
from studd.harness import (ExperimentConfig, RunReport, audit_labels, rank_reports, run_detailed,
                           run_experiment, sensitivity_grid, variant_name)
from studd.metrics import cohen_kappa, sliding_kappa
from studd.stream import (NO_LABEL, Concept, DataStream, StreamSchema, SyntheticDriftSpec,
                          generate_synthetic)
from studd.supervision import MethodKind

W = 300
UNSUPERVISED = ["bl-st", "bl-ret", "os", "of", "ff", "studd"]


def cfg(method, **kw):
    kw.setdefault("window", W)
    kw.setdefault("n_trees", 20)
    kw.setdefault("seed", 1)
    return ExperimentConfig(method=method, **kw)


@pytest.fixture(scope="module")
def runs(drift_stream):
    return {m.value: run_detailed(drift_stream, cfg(m)) for m in MethodKind}


def test_config_defaults_and_validation():
    c = ExperimentConfig()
    assert (c.window, c.ph_delta, c.ph_lambda, c.ks_significance, c.l_access, c.n_trees,
            c.sliding_eval_window) == (1000, 0.001, 50.0, 0.001, 50.0, 100, 200)
    assert c.delay == 500 and c.replace(l_delay=7).delay == 7
    assert c.method is MethodKind.STUDD and c.label == "STUDD"
    assert ExperimentConfig(method="ws", name="S_W0").label == "S_W0"
    for bad in [dict(window=1), dict(n_trees=0), dict(l_access=0), dict(l_delay=-1),
                dict(ks_significance=1.0), dict(ph_alpha=2.0), dict(method="nope")]:
        with pytest.raises((ValidationError, ValueError)):
            ExperimentConfig(**bad)


@pytest.mark.parametrize("method", [m.value for m in MethodKind])
def test_report_invariants(runs, drift_stream, method):
    res = runs[method]
    r = res.report
    n = len(drift_stream)
    assert r.stream_length == n and r.dataset == "bc_small" and r.seed == 1
    assert r.label_ratio == r.labels_used / n
    assert r.n_alarms == len(r.alarm_times)
    assert all(a < b for a, b in zip(r.alarm_times, r.alarm_times[1:]))
    assert all(W < a <= n for a in r.alarm_times)
    assert -1 <= r.kappa <= 1
    y_online = drift_stream.y[W:]
    assert res.predictions.shape == (n - W,)
    assert r.kappa == cohen_kappa(y_online, res.predictions)
    assert [t for t, _ in r.sliding_kappa] == list(range(W + 200, n + 1))
    assert [k for _, k in r.sliding_kappa] == sliding_kappa(y_online, res.predictions).tolist()


@pytest.mark.parametrize("method", UNSUPERVISED)
def test_unsupervised_runs_pass_label_audit(runs, method):
    res = runs[method]
    assert audit_labels(res, W) == []
    assert res.report.labels_used == W * (1 + res.report.n_alarms)


def test_audit_flags_monitoring_labels(runs):
    problems = audit_labels(runs["ss"], W)
    assert any("detection path" in p for p in problems)


def test_static_baseline_cost(runs, drift_stream):
    r = runs["bl-st"].report
    assert r.alarm_times == [] and r.labels_used == W
    assert r.label_ratio == W / len(drift_stream)


def test_periodic_retraining_schedule():
    spec = SyntheticDriftSpec(0, 10_000, [], [Concept([0.5, 0.5], [[0.0], [1.0]],
                                                      [[1.0], [1.0]])])
    r = run_experiment(generate_synthetic(spec), cfg("bl-ret", window=1000, n_trees=3))
    offsets = [t - 1000 for t in r.alarm_times]
    assert offsets == [1000 * k for k in range(1, 10)]
    assert r.labels_used == 10_000 and r.label_ratio == 1.0


def test_detectors_fire_after_the_drift(runs):
    # drift at 1500 on the fixture stream
    for m in ["ss", "ws", "dss", "dws", "os", "of", "ff", "studd"]:
        alarms = runs[m].report.alarm_times
        assert alarms and alarms[0] > 1500, m


def test_supervised_cost_counts_batches_and_arrivals(runs, drift_stream):
    for m in ["ss", "ws", "dss", "dws"]:
        res = runs[m]
        o = res.oracle
        assert o.labels_requested == W * (1 + res.report.n_alarms)
        assert res.report.labels_used == o.labels_requested + o.labels_dispensed
    online = len(drift_stream) - W
    assert runs["ss"].oracle.labels_dispensed == online
    # DSS labels due after the end of the stream never arrive
    assert runs["dss"].oracle.labels_dispensed == online - W // 2
    assert runs["ss"].report.label_ratio > 1.0


def test_retrain_batches_are_most_recent_window(runs):
    res = runs["studd"]
    for t in [W, *res.report.alarm_times]:
        idx = [a.index for a in res.oracle.accesses if a.time == t]
        assert idx == list(range(t - W + 1, t + 1))


def test_runs_are_deterministic(drift_stream, runs):
    again = run_experiment(drift_stream, cfg("of"))
    assert again == runs["of"].report


def test_stream_errors():
    schema = StreamSchema(1, (0, 1))
    short = DataStream(schema, np.zeros((10, 1)), np.zeros(10))
    with pytest.raises(ValidationError):
        run_experiment(short, cfg("studd", window=10))
    y = np.zeros(40, dtype=int)
    y[20] = NO_LABEL
    with pytest.raises(ValidationError):
        run_experiment(DataStream(schema, np.zeros((40, 1)), y), cfg("studd", window=10))


def test_unexpected_failures_become_runtime_errors(drift_stream, monkeypatch):
    import studd.harness as h

    def boom(*a, **k):
        raise RuntimeError("disk on fire")
    monkeypatch.setattr(h, "fit_forest", boom)
    with pytest.raises(StuddError, match="disk on fire"):
        run_experiment(drift_stream, cfg("bl-st"))


def test_minimal_grid_shape(drift_stream):
    reports, tables = sensitivity_grid(drift_stream, cfg("dws"), [50], [250])
    assert [r.method for r in reports] == ["S_W250", "SS", "STUDD"]
    assert list(tables) == [50]
    assert tables[50].methods == ["S_W250", "SS", "STUDD"]
    assert tables[50].ranks.sum() == 6


def test_full_grid_gives_four_tables_of_eight(drift_stream):
    small = DataStream(drift_stream.schema, drift_stream.X[:2000], drift_stream.y[:2000], "g")
    reports, tables = sensitivity_grid(small, cfg("dws", n_trees=3))
    assert len(reports) == 4 * 6 + 2
    assert sorted(tables) == [1, 10, 25, 50]
    for t in tables.values():
        assert t.methods == [variant_name(d) for d in (250, 500, 1000, 1500, 2000, 4000)] + [
            "SS", "STUDD"]
        assert t.ranks.sum() == 36


def test_grid_variant_names_by_delay():
    assert variant_name(2000) == "S_W2000"


def test_rank_reports(runs):
    reports = [runs[m].report for m in ["ss", "studd", "bl-st"]]
    by_kappa = rank_reports(reports, "kappa")
    assert by_kappa.methods == ["SS", "STUDD", "BL-st"]
    by_cost = rank_reports(reports, "cost")
    assert by_cost.average == {"SS": 3.0, "STUDD": 2.0, "BL-st": 1.0}
    with pytest.raises(ValidationError):
        rank_reports(reports + [reports[0]])
    with pytest.raises(ValidationError):
        rank_reports(reports, "speed")


def test_report_round_trips_through_dict(runs):
    r = runs["studd"].report
    assert RunReport.from_dict(dataclasses.asdict(r)) == r
