"""Decision trees and random forests, written from scratch on numpy.

Trees are CART classifiers grown greedily on weighted Gini impurity with
midpoint thresholds. A fitted tree is stored as flat node arrays, which keeps
prediction vectorised over batches of instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import ValidationError, mix, name_key
from .stream import NO_LABEL, StreamSchema

LEAF = -1
_PACKED_MAX_ROWS = 64       # below this, walking all trees at once is faster
_BOOTSTRAP_KEY = name_key("boot")


@dataclass(frozen=True)
class TreeConfig:
    """Growth parameters.

    ``n_candidate_features`` is an int, ``"sqrt"`` (ceil of the square root of
    the feature count) or ``None`` for all features.
    """

    max_depth: int | None = None
    min_split: int = 2
    n_candidate_features: int | str | None = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be positive or None")
        if self.min_split < 2:
            raise ValidationError("min_split must be >= 2")
        k = self.n_candidate_features
        if not (k is None or k == "sqrt" or (isinstance(k, int) and k >= 1)):
            raise ValidationError("n_candidate_features must be a positive int, 'sqrt' or None")

    def candidates(self, n_features: int) -> int:
        k = self.n_candidate_features
        if k is None:
            return n_features
        if k == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        if k > n_features:
            raise ValidationError("n_candidate_features exceeds n_features")
        return k


@dataclass
class DecisionTree:
    feature: np.ndarray          # LEAF for leaves
    threshold: np.ndarray        # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray           # (n_nodes, n_classes) training class counts
    _leaf_proba: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        totals = self.counts.sum(axis=1, keepdims=True)
        self._leaf_proba = self.counts / np.maximum(totals, 1)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            nxt = np.where(go_left, self.left[cur], self.right[cur])
            node[active] = nxt
            active = active[self.feature[nxt] != LEAF]
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self._leaf_proba[self.apply(X)]

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: lowest class index wins ties
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["counts"], dtype=np.int64).reshape(len(d["feature"]), -1),
        )


def _check_training_data(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("training data must be a nonempty 2-D array")
    if y.shape != (X.shape[0],):
        raise ValidationError("label vector length differs from number of rows")
    if np.any(y == NO_LABEL) or np.any(y < 0):
        raise ValidationError("training data contains unlabeled instances")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features must be finite")
    return X, y


def _best_split_on_feature(xs: np.ndarray, onehot: np.ndarray):
    """Best midpoint split of one feature; returns (impurity, threshold) or None.

    ``impurity`` is n times the weighted child Gini, which orders candidates
    the same way as the weighted Gini itself.
    """
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    valid = np.flatnonzero(xs[:-1] < xs[1:])
    if valid.size == 0:
        return None
    n = xs.shape[0]
    left = np.cumsum(onehot[order], axis=0)[valid]
    right = onehot.sum(axis=0) - left
    n_left = (valid + 1).astype(np.float64)
    n_right = n - n_left
    score = (n_left - (left * left).sum(axis=1) / n_left) + \
            (n_right - (right * right).sum(axis=1) / n_right)
    best = int(np.argmin(score))
    i = valid[best]
    lo, hi = xs[i], xs[i + 1]
    threshold = lo / 2.0 + hi / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return float(score[best]), float(threshold)


def fit_tree(X, y, n_classes: int, config: TreeConfig = TreeConfig(), seed: int = 0) -> DecisionTree:
    """Grow one classification tree on label indices ``y``.

    At each node a random subset of candidate features is drawn; the split
    with the lowest weighted Gini wins, ties going to the lower feature index
    and then to the lower threshold. If every drawn feature is constant on the
    node, the remaining features are tried in the same random order until one
    admits a split. A node becomes a leaf when it is pure, smaller than
    ``min_split``, at ``max_depth``, or constant on every feature.
    """
    X, y = _check_training_data(X, y)
    if y.max() >= n_classes:
        raise ValidationError("label index exceeds n_classes")
    n_features = X.shape[1]
    k = config.candidates(n_features)
    rng = np.random.default_rng(seed)
    onehot_all = np.eye(n_classes, dtype=np.int64)[y]

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(c):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(c)
        return len(feature) - 1

    root_idx = np.arange(X.shape[0])
    stack = [(new_node(onehot_all.sum(axis=0)), root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        n = idx.size
        if (np.count_nonzero(c) <= 1 or n < config.min_split
                or (config.max_depth is not None and depth >= config.max_depth)):
            continue
        onehot = onehot_all[idx]
        order = rng.permutation(n_features) if k < n_features else np.arange(n_features)
        best = None  # (score, feature, threshold)
        for pos, f in enumerate(order):
            if pos >= k and best is not None:
                break
            res = _best_split_on_feature(X[idx, f], onehot)
            if res is None:
                continue
            score, thr = res
            if best is None or score < best[0] or (score == best[0] and f < best[1]):
                best = (score, int(f), thr)
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(onehot_all[li].sum(axis=0))
        right[node] = new_node(onehot_all[ri].sum(axis=0))
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.int64).reshape(len(feature), n_classes),
    )


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    schema: StreamSchema
    seed: int = 0

    _packed: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.trees:
            raise ValidationError("a forest needs at least one tree")

    def _pack(self) -> tuple:
        # all trees in one node table; leaves point to themselves so a
        # fixed number of descent steps leaves every walker on its leaf
        if self._packed is None:
            sizes = [t.n_nodes for t in self.trees]
            roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
            feature = np.concatenate([t.feature for t in self.trees])
            threshold = np.concatenate([t.threshold for t in self.trees])
            proba = np.concatenate([t._leaf_proba for t in self.trees])
            own = np.arange(feature.size, dtype=np.int64)
            left = np.concatenate([t.left + r for t, r in zip(self.trees, roots)])
            right = np.concatenate([t.right + r for t, r in zip(self.trees, roots)])
            leaf = feature == LEAF
            left[leaf] = own[leaf]
            right[leaf] = own[leaf]
            feature = np.where(leaf, 0, feature)
            self._packed = (roots, feature, threshold, left, right, proba, leaf)
        return self._packed

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = X.reshape(1, -1) if single else X
        if X2.ndim != 2 or X2.shape[1] != self.schema.n_features:
            raise ValidationError(
                f"expected {self.schema.n_features} features, got shape {X.shape}")
        if not np.all(np.isfinite(X2)):
            raise ValidationError("features must be finite")
        return X2

    def apply(self, X) -> np.ndarray:
        """Leaf reached in every tree, as rows of indices into the packed node table."""
        X = self._check(X)
        roots, feature, threshold, left, right, _, leaf = self._pack()
        node = np.broadcast_to(roots, (X.shape[0], roots.size)).copy()
        rows = np.arange(X.shape[0])[:, None]
        while True:
            inner = ~leaf[node]
            if not inner.any():
                return node
            go_left = X[rows, feature[node]] <= threshold[node]
            node = np.where(go_left, left[node], right[node])

    def predict_proba_batch(self, X) -> np.ndarray:
        X = self._check(X)
        if X.shape[0] <= _PACKED_MAX_ROWS:
            per_tree = self._pack()[5][self.apply(X)]
        else:
            per_tree = np.stack([t.predict_proba(X) for t in self.trees], axis=1)
        # same (rows, trees, classes) reduction on both paths, so a row's
        # probabilities do not depend on the batch it was scored in
        return per_tree.sum(axis=1) / len(self.trees)

    def predict_index_batch(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba_batch(X), axis=1)

    def predict_proba(self, x) -> np.ndarray:
        return self.predict_proba_batch(np.asarray(x, dtype=np.float64).reshape(1, -1)
                                        if np.ndim(x) == 1 else x)[0]

    def predict(self, x):
        return self.schema.class_labels[int(np.argmax(self.predict_proba(x)))]

    def to_dict(self) -> dict:
        return {
            "kind": "random_forest",
            "schema": self.schema.to_dict(),
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls([DecisionTree.from_dict(t) for t in d["trees"]],
                   StreamSchema.from_dict(d["schema"]), d.get("seed", 0))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "RandomForest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def tree_seed(seed: int, i: int) -> int:
    return mix(seed, i)


def fit_forest(X, y, schema: StreamSchema, n_trees: int = 100,
               config: TreeConfig = TreeConfig(), seed: int = 0) -> RandomForest:
    """Bagged ensemble of :func:`fit_tree` learners.

    Tree ``i`` is grown with seed ``mix(seed, i)`` on a bootstrap resample of
    the same size as the data (when ``config.bootstrap``). The result depends
    only on the data order, ``config`` and ``seed``.
    """
    if n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    X, y = _check_training_data(X, y)
    if X.shape[1] != schema.n_features:
        raise ValidationError("feature count differs from schema")
    n = X.shape[0]
    trees = []
    for i in range(n_trees):
        ts = tree_seed(seed, i)
        if config.bootstrap:
            idx = bootstrap_indices(seed, i, n)
            Xi, yi = X[idx], y[idx]
        else:
            Xi, yi = X, y
        trees.append(fit_tree(Xi, yi, schema.n_classes, config, ts))
    return RandomForest(trees, schema, seed)


def bootstrap_indices(seed: int, i: int, n: int) -> np.ndarray:
    """Resample of ``range(n)`` used by tree ``i`` of a forest with ``seed``."""
    return np.random.default_rng(mix(tree_seed(seed, i), _BOOTSTRAP_KEY)).integers(0, n, size=n)


def oob_error(forest: RandomForest, X, y) -> float:
    """Out-of-bag error rate of a bootstrapped forest on its training data.

    Each instance is scored by the trees whose resample left it out; instances
    that every tree saw are skipped.
    """
    X, y = _check_training_data(X, y)
    n = X.shape[0]
    votes = np.zeros((n, forest.schema.n_classes))
    for i, tree in enumerate(forest.trees):
        out = np.ones(n, dtype=bool)
        out[bootstrap_indices(forest.seed, i, n)] = False
        votes[out] += tree.predict_proba(X[out])
    scored = votes.sum(axis=1) > 0
    if not scored.any():
        raise ValidationError("no out-of-bag instances")
    return float(np.mean(np.argmax(votes[scored], axis=1) != y[scored]))


def predict(model: RandomForest, x):
    """Class label for one feature vector.

    Soft vote: the class with the largest mean leaf probability, lowest class
    index on ties. With pure leaves this is the plain majority vote.
    """
    return model.predict(x)


def predict_proba(model: RandomForest, x) -> np.ndarray:
    return model.predict_proba(x)
