"""Change detectors: Page-Hinkley, two-sample Kolmogorov-Smirnov and window monitors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import ValidationError


class DriftStatus(enum.Enum):
    NO_CHANGE = "no_change"
    CHANGE = "change"
    WARMING = "warming"


# ---------------------------------------------------------------- Page-Hinkley

@dataclass
class PageHinkley:
    """One-sided Page-Hinkley test for an increase in the mean of a signal.

    Per update::

        mean    += (x - mean) / count
        cum_sum  = max(0, alpha * cum_sum + (x - mean - delta))

    and a change is signalled once ``count >= min_instances`` and
    ``cum_sum > lambda_threshold``. The caller resets after a change.
    """

    delta: float = 0.001
    lambda_threshold: float = 50.0
    alpha: float = 0.9999
    min_instances: int = 30
    count: int = field(default=0, init=False)
    running_mean: float = field(default=0.0, init=False)
    cum_sum: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValidationError("delta must be >= 0")
        if not self.lambda_threshold > 0:
            raise ValidationError("lambda_threshold must be > 0")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if self.min_instances < 1:
            raise ValidationError("min_instances must be >= 1")

    def update(self, x: float) -> DriftStatus:
        x = float(x)
        if not math.isfinite(x):
            raise ValidationError("Page-Hinkley input must be finite")
        self.count += 1
        self.running_mean += (x - self.running_mean) / self.count
        self.cum_sum = max(0.0, self.alpha * self.cum_sum + (x - self.running_mean - self.delta))
        if self.count >= self.min_instances and self.cum_sum > self.lambda_threshold:
            return DriftStatus.CHANGE
        return DriftStatus.NO_CHANGE

    def reset(self) -> None:
        self.count = 0
        self.running_mean = 0.0
        self.cum_sum = 0.0

    def fresh(self) -> "PageHinkley":
        """A new detector with the same parameters."""
        return PageHinkley(self.delta, self.lambda_threshold, self.alpha, self.min_instances)


def ph_update(state: PageHinkley, x: float) -> DriftStatus:
    return state.update(x)


def ph_reset(state: PageHinkley) -> None:
    state.reset()


# ---------------------------------------------------------- Kolmogorov-Smirnov

@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n: int
    m: int


def _sample(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValidationError(f"sample {name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"sample {name} contains non-finite values")
    return a


def _ks_sorted(a_sorted: np.ndarray, b_sorted: np.ndarray) -> float:
    # integer numerators over n*m, so D is the correctly rounded exact value
    n, m = a_sorted.size, b_sorted.size
    points = np.concatenate([a_sorted, b_sorted])
    ca = np.searchsorted(a_sorted, points, side="right").astype(np.int64)
    cb = np.searchsorted(b_sorted, points, side="right").astype(np.int64)
    return int(np.max(np.abs(ca * m - cb * n))) / (n * m)


def ks_statistic(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)| over right-continuous empirical CDFs."""
    a = np.sort(_sample(a, "a"))
    b = np.sort(_sample(b, "b"))
    return _ks_sorted(a, b)


def ks_pvalue(d: float, n: int, m: int) -> float:
    """Asymptotic two-sided p-value with the small-sample correction.

    With ``ne = n*m/(n+m)`` and ``t = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * d``,
    returns ``2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2)`` clamped to [0, 1].
    """
    if not 0.0 <= d <= 1.0:
        raise ValidationError("d must lie in [0, 1]")
    if n < 1 or m < 1:
        raise ValidationError("sample sizes must be >= 1")
    ne = n * m / (n + m)
    sq = math.sqrt(ne)
    t = (sq + 0.12 + 0.11 / sq) * d
    if t == 0.0:
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * t * t)
        total += term if k % 2 else -term
        if term < 1e-12:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_test(a, b) -> KsResult:
    a = _sample(a, "a")
    b = _sample(b, "b")
    d = ks_statistic(a, b)
    return KsResult(d, ks_pvalue(d, a.size, b.size), a.size, b.size)


# ------------------------------------------------------------ window monitors

class WindowMode(str, enum.Enum):
    SLIDING = "sliding_reference"
    FIXED = "fixed_reference"


class _RefBuckets:
    """Signed ECDF gaps between a frozen reference sample and a moving window.

    With distinct reference values ``u_0 < ... < u_{K-1}`` the supremum
    distance is reached either at some ``u_i`` or just below it, so it is
    enough to track, for every ``i``, the reference count minus the window
    count at ``u_i`` and just below ``u_i``. Adding or dropping one window
    value shifts a suffix of those gaps by one, which avoids any sorting.
    Gaps are kept as integers scaled by ``n * m``.
    """

    def __init__(self, reference: np.ndarray, m: int):
        values, counts = np.unique(reference, return_counts=True)
        n = int(counts.sum())
        self.values, self.n, self.m = values, n, m
        ref_cum = np.cumsum(counts) * m
        below_ref = np.concatenate([[0], ref_cum[:-1]])
        self.at = ref_cum.copy()            # gap at u_i
        self.below = below_ref.copy()       # gap just below u_i

    def move(self, x: float, step: int) -> None:
        # a value x counts at u_i iff x <= u_i, and below u_i iff x < u_i
        lo = int(np.searchsorted(self.values, x, side="left"))
        hi = int(np.searchsorted(self.values, x, side="right"))
        self.at[lo:] -= step * self.n
        self.below[hi:] -= step * self.n

    def max_gap(self) -> int:
        """n*m times the KS distance."""
        return int(max(self.at.max(), -self.at.min(), self.below.max(), -self.below.min()))

    def statistic(self) -> float:
        return self.max_gap() / (self.n * self.m)


def _alarm_table(w: int, significance: float) -> np.ndarray:
    """``table[k]`` is whether D = k/w rejects for two samples of size ``w``."""
    return np.array([ks_pvalue(k / w, w, w) < significance for k in range(w + 1)])


class WindowMonitor:
    """Compares a reference window against a detection window with the KS test.

    ``SLIDING`` keeps the reference immediately behind the detection window,
    ``FIXED`` freezes the first ``window_size`` values as the reference until
    :meth:`reset`. With ``n_features`` set, each update takes a feature vector
    and each feature is tested on its own; any feature with
    ``p < significance`` raises the alarm. A change stays latched (further
    updates are ignored) until :meth:`reset`.
    """

    def __init__(self, mode: WindowMode | str = WindowMode.FIXED, window_size: int = 1000,
                 significance: float = 0.001, n_features: int | None = None):
        try:
            self.mode = WindowMode(mode)
        except ValueError:
            raise ValidationError(f"unknown window mode {mode!r}") from None
        if window_size < 1:
            raise ValidationError("window_size must be positive")
        if not 0 < significance < 1:
            raise ValidationError("significance must lie in (0, 1)")
        if n_features is not None and n_features < 1:
            raise ValidationError("n_features must be positive")
        self.window_size = window_size
        self.significance = significance
        self.n_features = n_features
        self.reset()

    @property
    def per_feature(self) -> bool:
        return self.n_features is not None

    def reset(self) -> None:
        w, d = self.window_size, self.n_features or 1
        cap = 2 * w if self.mode is WindowMode.SLIDING else w
        self._ring = np.empty((cap, d))     # sliding: both windows; fixed: detection only
        self._ring_len = 0
        self._ring_pos = 0
        self._reference = np.empty((w, d))  # fixed mode only
        self._ref_len = 0
        self._buckets = None                # fixed mode: per-feature detection counts
        self._latched = False
        self.n_updates = 0

    def _push(self, v: np.ndarray) -> None:
        cap = self._ring.shape[0]
        self._ring[self._ring_pos] = v
        self._ring_pos = (self._ring_pos + 1) % cap
        self._ring_len = min(self._ring_len + 1, cap)

    def _ring_ordered(self) -> np.ndarray:
        if self._ring_len < self._ring.shape[0]:
            return self._ring[:self._ring_len]
        return np.concatenate([self._ring[self._ring_pos:], self._ring[:self._ring_pos]])

    def reference(self) -> np.ndarray:
        """Reference window in arrival order (columns are features)."""
        if self.mode is WindowMode.FIXED:
            return self._reference[:self._ref_len].copy()
        h = self._ring_ordered()
        return h[:min(len(h), self.window_size)].copy()

    def detection(self) -> np.ndarray:
        """Detection window in arrival order."""
        if self.mode is WindowMode.FIXED:
            return self._ring_ordered().copy()
        h = self._ring_ordered()
        return h[self.window_size:].copy()

    def _coerce(self, value) -> np.ndarray:
        v = np.asarray(value, dtype=np.float64).ravel()
        expected = self.n_features or 1
        if v.size != expected:
            raise ValidationError(f"expected {expected} value(s) per update, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("monitored values must be finite")
        return v

    def update(self, value) -> DriftStatus:
        v = self._coerce(value)
        if self._latched:
            return DriftStatus.CHANGE
        self.n_updates += 1
        w = self.window_size
        if self.mode is WindowMode.FIXED:
            if self._ref_len < w:
                self._reference[self._ref_len] = v
                self._ref_len += 1
                return DriftStatus.WARMING
            if self._buckets is None:
                self._buckets = [_RefBuckets(self._reference[:, j], w)
                                 for j in range(self._reference.shape[1])]
                self._alarm = _alarm_table(w, self.significance)
            if self._ring_len == w:
                old = self._ring[self._ring_pos]
                for b, x in zip(self._buckets, old):
                    b.move(x, -1)
            for b, x in zip(self._buckets, v):
                b.move(x, 1)
            self._push(v)
            if self._ring_len < w:
                return DriftStatus.WARMING
            for b in self._buckets:
                if self._alarm[b.max_gap() // w]:      # gap is w * w * D
                    self._latched = True
                    return DriftStatus.CHANGE
            return DriftStatus.NO_CHANGE
        self._push(v)
        if self._ring_len < 2 * w:
            return DriftStatus.WARMING
        h = self._ring_ordered()
        ref_sorted = np.sort(h[:w], axis=0)
        det_sorted = np.sort(h[w:], axis=0)
        for j in range(ref_sorted.shape[1]):
            d = _ks_sorted(ref_sorted[:, j], det_sorted[:, j])
            if ks_pvalue(d, w, w) < self.significance:
                self._latched = True
                return DriftStatus.CHANGE
        return DriftStatus.NO_CHANGE


def monitor_update(mon: WindowMonitor, value) -> DriftStatus:
    return mon.update(value)
