"""Label availability simulation and the supervised error-monitoring path.

:class:`LabelOracle` is the single place where true labels leave the
ground truth during a run. Every dispensed label is recorded in its access
log, which is what the label audit checks.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from typing import Hashable, Mapping

import numpy as np

from ._util import ValidationError
from .drift import DriftStatus, PageHinkley


class MethodKind(str, enum.Enum):
    BL_ST = "bl-st"
    BL_RET = "bl-ret"
    SS = "ss"
    WS = "ws"
    DSS = "dss"
    DWS = "dws"
    OS = "os"
    OF = "of"
    FF = "ff"
    STUDD = "studd"

    @property
    def supervised(self) -> bool:
        return self in _SUPERVISED

    @property
    def label(self) -> str:
        return _DISPLAY[self]


_SUPERVISED = {MethodKind.SS, MethodKind.WS, MethodKind.DSS, MethodKind.DWS}
_DISPLAY = {
    MethodKind.BL_ST: "BL-st", MethodKind.BL_RET: "BL-ret", MethodKind.SS: "SS",
    MethodKind.WS: "WS", MethodKind.DSS: "DSS", MethodKind.DWS: "DWS",
    MethodKind.OS: "OS", MethodKind.OF: "OF", MethodKind.FF: "FF",
    MethodKind.STUDD: "STUDD",
}


def label_availability(method: MethodKind, l_access: float, l_delay: int) -> tuple[float, int]:
    """(access %, delay) actually in force for ``method``."""
    method = MethodKind(method)
    if method is MethodKind.SS:
        return 100.0, 0
    if method is MethodKind.WS:
        return float(l_access), 0
    if method is MethodKind.DSS:
        return 100.0, int(l_delay)
    return float(l_access), int(l_delay)


@dataclass(frozen=True)
class LabelAccess:
    kind: str          # "monitor" (oracle arrival) or "batch" (on-demand annotation)
    index: int         # 1-based stream position of the labeled instance
    time: int          # stream position at which the label was handed out


class LabelOracle:
    """Simulates delayed and partial label arrival, and logs every label handed out.

    A label observed at time ``t`` survives with probability ``l_access/100``
    (decided once, from the oracle's own generator) and becomes due at
    ``t + l_delay``. Adaptation batches bypass the queue through
    :meth:`request_batch`; they are logged and counted as well.
    """

    def __init__(self, l_access: float = 100.0, l_delay: int = 0, seed: int = 0):
        if not 0 < l_access <= 100:
            raise ValidationError("l_access must lie in (0, 100]")
        if l_delay < 0:
            raise ValidationError("l_delay must be >= 0")
        self.l_access = float(l_access)
        self.l_delay = int(l_delay)
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._pending: list[tuple[int, int, Hashable]] = []
        self._last_observed: int | None = None
        self._last_polled: int | None = None
        self.accesses: list[LabelAccess] = []
        self.labels_dispensed = 0
        self.labels_requested = 0

    @property
    def labels_used(self) -> int:
        return self.labels_dispensed + self.labels_requested

    @property
    def n_pending(self) -> int:
        return len(self._pending)

    def observe(self, t: int, true_label: Hashable) -> None:
        if self._last_observed is not None and t <= self._last_observed:
            raise ValidationError("observation times must be strictly increasing")
        self._last_observed = t
        # always draw, so the pattern does not depend on l_access branching
        u = self._rng.random()
        if u * 100.0 < self.l_access:
            heapq.heappush(self._pending, (t + self.l_delay, t, true_label))

    def poll(self, t: int) -> list[tuple[int, Hashable]]:
        """Remove and return every label due at or before ``t``.

        Ordered by due time, then by instance index.
        """
        if self._last_polled is not None and t < self._last_polled:
            raise ValidationError("poll times must be nondecreasing")
        self._last_polled = t
        out = []
        while self._pending and self._pending[0][0] <= t:
            _, idx, label = heapq.heappop(self._pending)
            out.append((idx, label))
            self.accesses.append(LabelAccess("monitor", idx, t))
        self.labels_dispensed += len(out)
        return out

    def request_batch(self, indices, labels, t: int) -> np.ndarray:
        """Annotate a batch on demand; ``labels`` is the ground truth for ``indices``."""
        labels = np.asarray(labels)
        indices = list(indices)
        if len(indices) != labels.shape[0]:
            raise ValidationError("indices and labels differ in length")
        self.accesses.extend(LabelAccess("batch", int(i), t) for i in indices)
        self.labels_requested += len(indices)
        return labels.copy()


def oracle_observe(oracle: LabelOracle, t: int, true_label: Hashable) -> None:
    oracle.observe(t, true_label)


def oracle_poll(oracle: LabelOracle, t: int) -> list[tuple[int, Hashable]]:
    return oracle.poll(t)


def supervised_error_step(arrived: tuple[int, Hashable], prediction_log: Mapping[int, Hashable],
                          detector: PageHinkley) -> DriftStatus:
    """Feed the deployed model's 0/1 error on an arrived label to ``detector``."""
    idx, truth = arrived
    if idx not in prediction_log:
        raise ValidationError(f"no logged prediction for instance {idx}")
    return detector.update(0.0 if prediction_log[idx] == truth else 1.0)
