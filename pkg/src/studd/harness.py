"""Experiment loop: fit on the first W instances, predict online, retrain on alarms.

Every method follows the same workflow and differs only in the signal fed to
its detector and in how many labels it consumes:

============  ==================================================  ===========
method        detector input                                      detector
============  ==================================================  ===========
STUDD         student/teacher disagreement                        Page-Hinkley
SS/WS/DSS/DWS teacher 0/1 error on labels released by the oracle  Page-Hinkley
OS / OF       teacher confidence (max class probability)          KS windows
FF            raw feature vector, one KS test per feature         KS windows
BL-st         nothing                                             -
BL-ret        alarm every W online instances                      -
============  ==================================================  ===========

Positions are 1-based stream indices throughout (``alarm_times``, the x
axis of ``sliding_kappa``, oracle indices).
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._util import StuddError, ValidationError, mix, name_key
from .drift import DriftStatus, PageHinkley, WindowMode, WindowMonitor
from .learners import TreeConfig, fit_forest
from .metrics import RankTable, average_ranks, cohen_kappa, label_cost_ratio, sliding_kappa
from .stream import NO_LABEL, DataStream
from .student_teacher import fit_student_teacher
from .supervision import LabelOracle, MethodKind, label_availability, supervised_error_step

log = logging.getLogger(__name__)

ORACLE_KEY = name_key("oracle")
DEFAULT_L_ACCESS_GRID = (1, 10, 25, 50)
DEFAULT_L_DELAY_GRID = (250, 500, 1000, 1500, 2000, 4000)


@dataclass(frozen=True)
class ExperimentConfig:
    method: MethodKind = MethodKind.STUDD
    window: int = 1000
    ph_delta: float = 0.001
    ph_lambda: float = 50.0
    ph_alpha: float = 0.9999
    ph_min_instances: int = 30
    ks_significance: float = 0.001
    l_access: float = 50.0
    l_delay: int | None = None      # None: window // 2
    n_trees: int = 100
    seed: int = 0
    sliding_eval_window: int = 200
    tree_config: TreeConfig = field(default_factory=TreeConfig)
    name: str | None = None         # method label in reports; defaults to the method's

    def __post_init__(self):
        object.__setattr__(self, "method", MethodKind(self.method))
        if self.window < 2:
            raise ValidationError("window must be >= 2")
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if not 0 < self.l_access <= 100:
            raise ValidationError("l_access must lie in (0, 100]")
        if self.l_delay is not None and self.l_delay < 0:
            raise ValidationError("l_delay must be >= 0")
        if not 0 < self.ks_significance < 1:
            raise ValidationError("ks_significance must lie in (0, 1)")
        if self.sliding_eval_window < 2:
            raise ValidationError("sliding_eval_window must be >= 2")
        self.page_hinkley()  # validates the PH parameters

    @property
    def delay(self) -> int:
        return self.window // 2 if self.l_delay is None else self.l_delay

    @property
    def label(self) -> str:
        return self.name or self.method.label

    def page_hinkley(self) -> PageHinkley:
        return PageHinkley(self.ph_delta, self.ph_lambda, self.ph_alpha, self.ph_min_instances)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunReport:
    dataset: str
    method: str
    kappa: float
    label_ratio: float
    n_alarms: int
    alarm_times: list[int]
    sliding_kappa: list[tuple[int, float]]
    labels_used: int
    stream_length: int
    seed: int

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunReport":
        return cls(
            dataset=str(d["dataset"]), method=str(d["method"]), kappa=float(d["kappa"]),
            label_ratio=float(d["label_ratio"]), n_alarms=int(d["n_alarms"]),
            alarm_times=[int(t) for t in d["alarm_times"]],
            sliding_kappa=[(int(t), float(k)) for t, k in d["sliding_kappa"]],
            labels_used=int(d["labels_used"]), stream_length=int(d["stream_length"]),
            seed=int(d["seed"]))


@dataclass
class RunResult:
    """A report plus the run internals used for auditing and plotting."""

    report: RunReport
    oracle: LabelOracle
    predictions: np.ndarray     # label indices for positions W+1 .. N
    retrain_points: list[int] = field(default_factory=list)


class _Deployed:
    """The current model(s) of a run and the method-specific detector."""

    def __init__(self, config: ExperimentConfig, schema, X, y, n_features):
        c = config
        self.method = c.method
        self.studd = None
        if c.method is MethodKind.STUDD:
            self.studd = fit_student_teacher(X, y, schema, n_trees=c.n_trees, seed=c.seed,
                                             config=c.tree_config, detector=c.page_hinkley())
            self.teacher = self.studd.teacher
            self.detector = self.studd.detector
        else:
            self.teacher = fit_forest(X, y, schema, n_trees=c.n_trees, config=c.tree_config,
                                      seed=c.seed)
            if c.method.supervised:
                self.detector = c.page_hinkley()
            elif c.method in (MethodKind.OS, MethodKind.OF):
                mode = WindowMode.SLIDING if c.method is MethodKind.OS else WindowMode.FIXED
                self.detector = WindowMonitor(mode, c.window, c.ks_significance)
            elif c.method is MethodKind.FF:
                self.detector = WindowMonitor(WindowMode.FIXED, c.window, c.ks_significance,
                                              n_features=n_features)
            else:
                self.detector = None

    def batch(self, X: np.ndarray):
        """Deployed predictions and per-instance detector input for a block."""
        if self.studd is not None:
            return self.studd.mimicking_errors(X)
        if self.method in (MethodKind.OS, MethodKind.OF):
            proba = self.teacher.predict_proba_batch(X)
            return np.argmax(proba, axis=1), proba.max(axis=1)
        if self.method is MethodKind.FF:
            return self.teacher.predict_index_batch(X), X
        return self.teacher.predict_index_batch(X), None


def run_detailed(stream: DataStream, config: ExperimentConfig,
                 dataset: str | None = None) -> RunResult:
    X, y = stream.arrays()
    n = len(stream)
    W = config.window
    if n <= W:
        raise ValidationError(f"stream length {n} must exceed the training window {W}")
    if np.any(y == NO_LABEL):
        raise ValidationError("evaluation needs a fully labeled stream")
    method = config.method
    access, delay = label_availability(method, config.l_access, config.delay)
    oracle = LabelOracle(access, delay, seed=mix(config.seed, ORACLE_KEY))

    def fit(end: int) -> _Deployed:
        # the W instances ending at 0-based index ``end - 1``
        lo = end - W
        labels = oracle.request_batch(range(lo + 1, end + 1), y[lo:end], t=end)
        return _Deployed(config, stream.schema, X[lo:end], labels, stream.schema.n_features)

    deployed = fit(W)
    preds = np.empty(n - W, dtype=np.int64)
    alarms: list[int] = []
    pred_log: dict[int, int] = {}
    log_horizon = delay + W
    generation_start = W        # predictions at positions > this belong to the current model
    chunk = max(W, 256)

    i = W
    while i < n:
        hi = min(n, i + chunk)
        pred_block, signal = deployed.batch(X[i:hi])
        alarm_at = None
        for j in range(i, hi):
            p = j + 1
            pred = int(pred_block[j - i])
            preds[j - W] = pred
            status = DriftStatus.NO_CHANGE
            if method is MethodKind.STUDD:
                status = deployed.detector.update(signal[j - i])
            elif method.supervised:
                pred_log[p] = pred
                oracle.observe(p, int(y[j]))
                for idx, truth in oracle.poll(p):
                    if idx <= generation_start or status is DriftStatus.CHANGE:
                        pred_log.pop(idx, None)
                        continue
                    status = supervised_error_step((idx, truth), pred_log, deployed.detector)
                    del pred_log[idx]
                while pred_log:
                    oldest = next(iter(pred_log))
                    if oldest > p - log_horizon:
                        break
                    del pred_log[oldest]
            elif method in (MethodKind.OS, MethodKind.OF, MethodKind.FF):
                status = deployed.detector.update(signal[j - i])
            elif method is MethodKind.BL_RET:
                if (p - W) % W == 0:
                    status = DriftStatus.CHANGE
            if status is DriftStatus.CHANGE:
                alarm_at = j
                break
        if alarm_at is None:
            i = hi
            continue
        p = alarm_at + 1
        alarms.append(p)
        log.debug("%s: alarm at %d", config.label, p)
        deployed = fit(p)
        generation_start = p
        i = p

    y_eval = y[W:]      # evaluation only; never reaches a detector
    kappa = cohen_kappa(y_eval, preds)
    sk = sliding_kappa(y_eval, preds, config.sliding_eval_window)
    first = W + config.sliding_eval_window
    series = [(first + k, float(v)) for k, v in enumerate(sk)]
    used = oracle.labels_used
    report = RunReport(
        dataset=dataset or stream.name, method=config.label, kappa=float(kappa),
        label_ratio=label_cost_ratio(used, n), n_alarms=len(alarms), alarm_times=alarms,
        sliding_kappa=series, labels_used=used, stream_length=n, seed=config.seed)
    return RunResult(report, oracle, preds, list(alarms))


def run_experiment(stream: DataStream, config: ExperimentConfig,
                   dataset: str | None = None) -> RunReport:
    """Run one method over one stream and score it."""
    try:
        return run_detailed(stream, config, dataset).report
    except StuddError:
        raise
    except Exception as exc:
        raise StuddError(f"run {config.label} on {dataset or stream.name} failed: {exc}") from exc


def audit_labels(result: RunResult, window: int) -> list[str]:
    """Label-access violations for an unsupervised run (empty when clean).

    Clean means: only on-demand batches, one initial batch plus one per alarm,
    each exactly the ``window`` instances ending at the batch time.
    """
    problems = []
    acc = result.oracle.accesses
    monitor = [a for a in acc if a.kind != "batch"]
    if monitor:
        problems.append(f"{len(monitor)} labels reached the detection path")
    expected_times = [window, *result.report.alarm_times]
    if len(acc) != window * len(expected_times):
        problems.append(f"{len(acc)} label accesses, expected {window * len(expected_times)}")
    by_time: dict[int, list[int]] = {}
    for a in acc:
        by_time.setdefault(a.time, []).append(a.index)
    for t in expected_times:
        if by_time.get(t) != list(range(t - window + 1, t + 1)):
            problems.append(f"batch at {t} is not the {window} most recent instances")
    extra = set(by_time) - set(expected_times)
    if extra:
        problems.append(f"unexpected label batches at {sorted(extra)}")
    return problems


# ------------------------------------------------------------------- grids

def _run_task(task):
    stream, config, dataset = task
    return run_experiment(stream, config, dataset)


def run_many(tasks: Sequence[tuple[DataStream, ExperimentConfig, str]],
             jobs: int = 1) -> list[RunReport]:
    """Run independent experiments, optionally in worker processes.

    Results come back in task order; each run owns its state, so the output
    does not depend on ``jobs``.
    """
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def variant_name(l_delay: int) -> str:
    return f"S_W{l_delay}"


def sensitivity_grid(streams: DataStream | Mapping[str, DataStream], base: ExperimentConfig,
                     l_access_set: Iterable[float] = DEFAULT_L_ACCESS_GRID,
                     l_delay_set: Iterable[int] = DEFAULT_L_DELAY_GRID,
                     jobs: int = 1) -> tuple[list[RunReport], dict[float, RankTable]]:
    """Supervised variants over an (access, delay) grid against SS and STUDD.

    For each dataset: one delayed weakly supervised run per grid cell (named
    ``S_W<delay>``), plus one SS and one STUDD run. Returns all reports and,
    per access level, a kappa rank table over the variants, SS and STUDD.
    """
    if isinstance(streams, DataStream):
        streams = {streams.name: streams}
    access = list(l_access_set)
    delays = list(l_delay_set)
    if not access or not delays or not streams:
        raise ValidationError("grid and dataset sets must be nonempty")

    tasks = []
    for name, stream in streams.items():
        for a in access:
            for d in delays:
                tasks.append((stream, base.replace(method=MethodKind.DWS, l_access=a, l_delay=d,
                                                   name=variant_name(d)), name))
        tasks.append((stream, base.replace(method=MethodKind.SS, name=None), name))
        tasks.append((stream, base.replace(method=MethodKind.STUDD, name=None), name))
    reports = run_many(tasks, jobs)

    per_ds = len(access) * len(delays) + 2
    tables = {}
    for ai, a in enumerate(access):
        scores = {}
        for di, name in enumerate(streams):
            block = reports[di * per_ds:(di + 1) * per_ds]
            row = {r.method: r.kappa for r in block[ai * len(delays):(ai + 1) * len(delays)]}
            row["SS"] = block[-2].kappa
            row["STUDD"] = block[-1].kappa
            scores[name] = row
        methods = [variant_name(d) for d in delays] + ["SS", "STUDD"]
        tables[a] = average_ranks(scores, higher_is_better=True, methods=methods)
    return reports, tables


def rank_reports(reports: Sequence[RunReport], metric: str = "kappa") -> RankTable:
    """Rank table over datasets x methods from a set of reports.

    ``metric`` is ``"kappa"`` (higher is better) or ``"cost"`` (label ratio,
    lower is better).
    """
    if metric not in ("kappa", "cost"):
        raise ValidationError("metric must be 'kappa' or 'cost'")
    scores: dict[str, dict[str, float]] = {}
    methods: list[str] = []
    for r in reports:
        value = r.kappa if metric == "kappa" else r.label_ratio
        if r.method in scores.setdefault(r.dataset, {}):
            raise ValidationError(f"duplicate report for {r.dataset}/{r.method}")
        scores[r.dataset][r.method] = value
        if r.method not in methods:
            methods.append(r.method)
    return average_ranks(scores, higher_is_better=(metric == "kappa"), methods=methods)
