"""Labeled instance streams: data model, CSV ingestion and synthetic drift generators.

Streams are array-backed. Iterating a :class:`DataStream` yields
:class:`Instance` objects in stream order and always restarts from the first
instance, so two full reads are identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterator, Sequence

import numpy as np

from ._util import ParseError, SchemaError, ValidationError

NO_LABEL = -1


@dataclass(frozen=True)
class StreamSchema:
    n_features: int
    class_labels: tuple
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.n_features < 1:
            raise SchemaError("n_features must be >= 1")
        if len(self.class_labels) < 2:
            raise SchemaError("at least two class labels are required")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise SchemaError("class_labels contains duplicates")
        if self.feature_names is not None and len(self.feature_names) != self.n_features:
            raise SchemaError("feature_names length differs from n_features")

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def label_index(self, label: Hashable) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise ValidationError(f"label {label!r} not in class_labels") from None

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "class_labels": list(self.class_labels),
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSchema":
        return cls(d["n_features"], tuple(d["class_labels"]), d.get("feature_names"))


@dataclass(frozen=True)
class Instance:
    """One observation. ``label`` is ``None`` when unlabeled."""

    features: np.ndarray
    label: Hashable | None = None

    def validate(self, schema: StreamSchema) -> None:
        x = np.asarray(self.features)
        if x.shape != (schema.n_features,):
            raise ValidationError(f"expected {schema.n_features} features, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("features must be finite")
        if self.label is not None and self.label not in schema.class_labels:
            raise ValidationError(f"label {self.label!r} not in class_labels")


class DataStream:
    """An ordered, finite stream of instances over a fixed schema.

    ``X`` holds the feature matrix and ``y`` the label index of each instance
    into ``schema.class_labels`` (``NO_LABEL`` for unlabeled instances).
    Not safe for concurrent iteration of the same iterator; distinct iterators
    and distinct streams are independent.
    """

    def __init__(self, schema: StreamSchema, X, y, name: str = "stream"):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != schema.n_features:
            raise SchemaError(f"feature matrix must have shape (n, {schema.n_features})")
        if y.shape != (X.shape[0],):
            raise SchemaError("label vector length differs from number of rows")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features must be finite")
        if y.size and (y.min() < NO_LABEL or y.max() >= schema.n_classes):
            raise ValidationError("label index out of range")
        self.schema = schema
        self.X = X
        self.y = y
        self.name = name

    @classmethod
    def from_instances(cls, schema: StreamSchema, instances: Sequence[Instance],
                       name: str = "stream") -> "DataStream":
        X = np.empty((len(instances), schema.n_features))
        y = np.full(len(instances), NO_LABEL, dtype=np.int64)
        for i, inst in enumerate(instances):
            inst.validate(schema)
            X[i] = inst.features
            if inst.label is not None:
                y[i] = schema.label_index(inst.label)
        return cls(schema, X, y, name)

    @property
    def length_hint(self) -> int:
        return self.X.shape[0]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[Instance]:
        labels = self.schema.class_labels
        for x, yi in zip(self.X, self.y):
            yield Instance(x.copy(), None if yi == NO_LABEL else labels[yi])

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X, self.y

    def __repr__(self):
        return (f"DataStream(name={self.name!r}, n={len(self)}, "
                f"n_features={self.schema.n_features}, classes={self.schema.n_classes})")


def truncate(stream: DataStream, max_n: int) -> DataStream:
    """First ``max_n`` instances of ``stream`` (the whole stream if shorter)."""
    if max_n < 1:
        raise ValidationError("max_n must be >= 1")
    return DataStream(stream.schema, stream.X[:max_n], stream.y[:max_n], stream.name)


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def load_csv(path, has_header: bool = True, label_column: int | str = -1,
             class_labels: Sequence | None = None, name: str | None = None) -> DataStream:
    """Read a comma-delimited file into a :class:`DataStream`.

    All non-label columns are parsed as reals. Unless ``class_labels`` is
    given, the label domain is the set of distinct labels in the file, sorted
    numerically when every label parses as a number and lexically otherwise.
    Row numbers in parse errors count data rows from 1 (the header excluded).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = None
    if has_header and rows:
        header, rows = rows[0], rows[1:]
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    n_cols = len(header) if header is not None else len(rows[0])
    if n_cols < 2:
        raise SchemaError("need at least one feature column and a label column")
    if isinstance(label_column, str):
        if header is None or label_column not in header:
            raise SchemaError(f"label column {label_column!r} not found in header")
        lab = header.index(label_column)
    else:
        lab = label_column % n_cols if -n_cols <= label_column < n_cols else None
        if lab is None:
            raise SchemaError(f"label column index {label_column} out of range")
    feat_cols = [c for c in range(n_cols) if c != lab]

    X = np.empty((len(rows), len(feat_cols)))
    raw_labels = []
    for i, row in enumerate(rows, start=1):
        if len(row) != n_cols:
            raise ParseError(f"expected {n_cols} fields, found {len(row)}", row=i)
        try:
            X[i - 1] = [float(row[c]) for c in feat_cols]
        except ValueError as exc:
            raise ParseError(f"non-numeric feature ({exc})", row=i) from None
        if not np.all(np.isfinite(X[i - 1])):
            raise ParseError("non-finite feature value", row=i)
        value = row[lab].strip()
        if value == "":
            raise ParseError("missing label", row=i)
        raw_labels.append(value)

    if class_labels is None:
        class_labels = sorted(set(raw_labels), key=_label_sort_key)
    schema = StreamSchema(
        len(feat_cols), tuple(class_labels),
        None if header is None else tuple(header[c] for c in feat_cols))
    index = {lbl: k for k, lbl in enumerate(schema.class_labels)}
    try:
        y = np.array([index[v] for v in raw_labels], dtype=np.int64)
    except KeyError as exc:
        raise SchemaError(f"label {exc.args[0]!r} not among declared class_labels") from None
    return DataStream(schema, X, y, name or path.stem)


def write_csv(stream: DataStream, path, header: bool = True) -> None:
    names = stream.schema.feature_names or tuple(f"x{j}" for j in range(stream.schema.n_features))
    labels = stream.schema.class_labels
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([*names, "label"])
        for x, yi in zip(stream.X, stream.y):
            w.writerow([repr(float(v)) for v in x] + ["" if yi == NO_LABEL else labels[yi]])


# --------------------------------------------------------------------------
# synthetic streams

@dataclass
class Concept:
    """Gaussian class-conditional mixture: one diagonal Gaussian per class."""

    priors: list[float]
    means: list[list[float]]
    variances: list[list[float]]

    def validate(self, n_features: int | None = None) -> None:
        k = len(self.priors)
        if k < 2:
            raise ValidationError("a concept needs at least two classes")
        if len(self.means) != k or len(self.variances) != k:
            raise ValidationError("priors, means and variances must have one entry per class")
        if any(p < 0 for p in self.priors) or abs(sum(self.priors) - 1.0) > 1e-9:
            raise ValidationError("class priors must be nonnegative and sum to 1")
        q = n_features if n_features is not None else len(self.means[0])
        for m, v in zip(self.means, self.variances):
            if len(m) != q or len(v) != q:
                raise ValidationError("all mean/variance vectors must share one dimension")
            if any(not (s > 0 and math.isfinite(s)) for s in v):
                raise ValidationError("variances must be positive and finite")
            if not all(math.isfinite(a) for a in m):
                raise ValidationError("means must be finite")


@dataclass
class SyntheticDriftSpec:
    """Piecewise-stationary stream: concept k governs positions (drift_{k-1}, drift_k].

    Positions are 1-based; ``concepts`` has one more entry than ``drift_points``.
    """

    seed: int
    n_instances: int
    drift_points: list[int]
    concepts: list[Concept]
    class_labels: list | None = field(default=None)

    def validate(self) -> None:
        if self.n_instances < 1:
            raise ValidationError("n_instances must be positive")
        if len(self.concepts) != len(self.drift_points) + 1:
            raise ValidationError("need exactly one more concept than drift points")
        if any(b <= a for a, b in zip(self.drift_points, self.drift_points[1:])):
            raise ValidationError("drift_points must be strictly increasing")
        if any(not 1 <= p <= self.n_instances for p in self.drift_points):
            raise ValidationError("drift_points must lie in [1, n_instances]")
        q = len(self.concepts[0].means[0])
        k = len(self.concepts[0].priors)
        for c in self.concepts:
            c.validate(q)
            if len(c.priors) != k:
                raise ValidationError("all concepts must have the same number of classes")
        if self.class_labels is not None and len(self.class_labels) != k:
            raise ValidationError("class_labels length differs from number of classes")

    @property
    def n_features(self) -> int:
        return len(self.concepts[0].means[0])

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "n_instances": self.n_instances,
            "drift_points": list(self.drift_points),
            "concepts": [
                {"priors": c.priors, "means": c.means, "variances": c.variances}
                for c in self.concepts
            ],
        }
        if self.class_labels is not None:
            d["class_labels"] = list(self.class_labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticDriftSpec":
        try:
            spec = cls(
                seed=int(d["seed"]),
                n_instances=int(d["n_instances"]),
                drift_points=[int(p) for p in d.get("drift_points", [])],
                concepts=[Concept(list(c["priors"]), [list(m) for m in c["means"]],
                                  [list(v) for v in c["variances"]]) for c in d["concepts"]],
                class_labels=d.get("class_labels"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed synthetic spec: {exc}") from None
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path) -> "SyntheticDriftSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def generate_synthetic(spec: SyntheticDriftSpec, name: str = "synthetic") -> DataStream:
    """Sample a stream from ``spec``; bit-identical for a fixed spec and seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    q = spec.n_features
    k = len(spec.concepts[0].priors)
    bounds = [0, *spec.drift_points, spec.n_instances]
    X = np.empty((spec.n_instances, q))
    y = np.empty(spec.n_instances, dtype=np.int64)
    for concept, lo, hi in zip(spec.concepts, bounds[:-1], bounds[1:]):
        n = hi - lo
        if n <= 0:
            continue
        means = np.asarray(concept.means, dtype=np.float64)
        sds = np.sqrt(np.asarray(concept.variances, dtype=np.float64))
        labels = rng.choice(k, size=n, p=np.asarray(concept.priors, dtype=np.float64))
        noise = rng.standard_normal((n, q))
        X[lo:hi] = means[labels] + sds[labels] * noise
        y[lo:hi] = labels
    class_labels = tuple(spec.class_labels) if spec.class_labels is not None else tuple(range(k))
    return DataStream(StreamSchema(q, class_labels), X, y, name)


def boundary_concentration_spec(seed: int, n_instances: int = 8000, drift_point: int = 3000,
                                n_features: int = 4, separation: float = 2.0,
                                variance: float = 0.5, boundary_variance: float = 0.0025,
                                new_offset: float = 1.5) -> SyntheticDriftSpec:
    """Two-class stream whose post-drift mass sits on the old decision boundary.

    Before the drift the classes differ only in feature 0 (means 0 and
    ``separation``); the remaining features are noise. Afterwards both classes
    are pinned to feature 0 = ``separation / 2`` with ``boundary_variance``,
    which is where the old classes overlapped, and are separated along
    feature 1 instead (means -/+ ``new_offset``). The deployed model becomes
    uninformative, p(X) changes, and the new concept is learnable.
    """
    if n_features < 2:
        raise ValidationError("boundary concentration needs at least two features")
    q, s = n_features, separation
    zeros = [0.0] * (q - 2)
    before = Concept([0.5, 0.5], [[0.0, 0.0, *zeros], [s, 0.0, *zeros]],
                     [[variance] * q, [variance] * q])
    post_var = [boundary_variance, variance, *([variance] * (q - 2))]
    after = Concept([0.5, 0.5], [[s / 2, -new_offset, *zeros], [s / 2, new_offset, *zeros]],
                    [post_var, list(post_var)])
    return SyntheticDriftSpec(seed, n_instances, [drift_point], [before, after])
