"""Evaluation metrics: Cohen's kappa, windowed kappa, label cost and average ranks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._util import ValidationError


def _kappa_from_counts(agree: int, row: Sequence[int], col: Sequence[int], n: int) -> float:
    # (p_o - p_e) / (1 - p_e) scaled by n^2: exact integers, one rounding
    s = sum(int(r) * int(c) for r, c in zip(row, col))
    if s == n * n:      # p_e == 1
        return 0.0
    return (n * int(agree) - s) / (n * n - s)


def _encode(y_true, y_pred) -> tuple[np.ndarray, np.ndarray, int]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValidationError("label sequences must be 1-D and of equal length")
    if y_true.size == 0:
        raise ValidationError("label sequences are empty")
    _, codes = np.unique(np.concatenate([y_true, y_pred]), return_inverse=True)
    n = y_true.size
    return codes[:n], codes[n:], int(codes.max()) + 1


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    t, p, k = _encode(y_true, y_pred)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def cohen_kappa(y_true, y_pred) -> float:
    """(p_o - p_e) / (1 - p_e); 0 when chance agreement is total (p_e == 1)."""
    cm = confusion_matrix(y_true, y_pred)
    n = int(cm.sum())
    return _kappa_from_counts(int(np.trace(cm)), cm.sum(axis=1), cm.sum(axis=0), n)


def sliding_kappa(y_true, y_pred, window: int = 200) -> np.ndarray:
    """Kappa over every run of ``window`` consecutive pairs.

    Element ``i`` covers pairs ``i .. i + window - 1``; the result has
    ``len(y_true) - window + 1`` entries (none if the input is shorter).
    Maintained incrementally from the confusion-matrix margins, so each value
    equals :func:`cohen_kappa` on the same slice exactly.
    """
    if window < 2:
        raise ValidationError("window must be >= 2")
    t, p, k = _encode(y_true, y_pred)
    n = t.size
    if n < window:
        return np.empty(0)
    row = [0] * k
    col = [0] * k
    agree = 0
    out = np.empty(n - window + 1)
    t_l, p_l = t.tolist(), p.tolist()
    for i in range(n):
        a, b = t_l[i], p_l[i]
        row[a] += 1
        col[b] += 1
        agree += a == b
        if i >= window:
            a, b = t_l[i - window], p_l[i - window]
            row[a] -= 1
            col[b] -= 1
            agree -= a == b
        if i >= window - 1:
            out[i - window + 1] = _kappa_from_counts(agree, row, col, window)
    return out


def label_cost_ratio(labels_used: int, stream_length: int) -> float:
    if stream_length <= 0:
        raise ValidationError("stream_length must be positive")
    return labels_used / stream_length


def rank_row(scores: Sequence[float], higher_is_better: bool = True) -> np.ndarray:
    """Ranks starting at 1 for the best score; tied scores share their mean rank."""
    s = np.asarray(scores, dtype=np.float64)
    key = -s if higher_is_better else s
    order = np.argsort(key, kind="stable")
    ranks = np.empty(s.size)
    sorted_key = key[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_key[j + 1] == sorted_key[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class RankTable:
    datasets: list[str]
    methods: list[str]
    scores: np.ndarray        # datasets x methods
    ranks: np.ndarray         # datasets x methods
    higher_is_better: bool = True

    @property
    def average(self) -> dict[str, float]:
        return {m: float(r) for m, r in zip(self.methods, self.ranks.mean(axis=0))}

    def to_dict(self) -> dict:
        return {
            "datasets": list(self.datasets),
            "methods": list(self.methods),
            "higher_is_better": self.higher_is_better,
            "scores": self.scores.tolist(),
            "ranks": self.ranks.tolist(),
            "average_rank": self.average,
        }


def average_ranks(scores: Mapping[str, Mapping[str, float]], higher_is_better: bool = True,
                  methods: Sequence[str] | None = None) -> RankTable:
    """Rank methods within each dataset and average the ranks per method.

    ``scores[dataset][method]``; every dataset must score every method.
    """
    if not scores:
        raise ValidationError("no scores to rank")
    datasets = list(scores)
    if methods is None:
        methods = list(next(iter(scores.values())))
    methods = list(methods)
    mat = np.empty((len(datasets), len(methods)))
    for i, d in enumerate(datasets):
        row = scores[d]
        for j, m in enumerate(methods):
            if m not in row or row[m] is None or not np.isfinite(row[m]):
                raise ValidationError(f"missing score for dataset {d!r}, method {m!r}")
            mat[i, j] = row[m]
    ranks = np.vstack([rank_row(r, higher_is_better) for r in mat])
    return RankTable(datasets, methods, mat, ranks, higher_is_better)
