import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from studd import ValidationError
from studd._util import mix, name_key
from studd.learners import (LEAF, DecisionTree, RandomForest, TreeConfig, fit_forest, fit_tree,
                            oob_error, predict, predict_proba)
from studd.stream import Concept, StreamSchema, SyntheticDriftSpec, generate_synthetic

AB = StreamSchema(1, ("a", "b"))


def blobs(seed, n, sep=4.0, var=0.5):
    spec = SyntheticDriftSpec(seed, n, [], [Concept([0.5, 0.5], [[0, 0], [sep, sep]],
                                                    [[var, var], [var, var]])])
    return generate_synthetic(spec)


def leaf_tree(counts):
    return DecisionTree(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]),
                        np.array([counts]))


def test_mix_is_splitmix64():
    # first output of a splitmix64 generator seeded with 0
    from studd._util import _splitmix64
    assert _splitmix64(0) == 0xE220A8397B1DCDAF
    assert mix(0, 0) == 12035550249420947055
    assert name_key("student") == int.from_bytes(b"student", "big")
    assert len({mix(7, i) for i in range(1000)}) == 1000


def test_pure_node_is_a_leaf():
    t = fit_tree([[0.0], [1.0]], [0, 0], 2, TreeConfig(n_candidate_features=None))
    assert t.n_nodes == 1 and t.counts[0].tolist() == [2, 0]


def test_single_midpoint_split():
    t = fit_tree([[0.0], [10.0]], [0, 1], 2, TreeConfig(n_candidate_features=None))
    assert t.n_nodes == 3
    assert (t.feature[0], t.threshold[0]) == (0, 5.0)
    assert t.counts[t.left[0]].tolist() == [1, 0] and t.counts[t.right[0]].tolist() == [0, 1]


def test_equal_gain_prefers_lower_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    t = fit_tree(X, [0, 1], 2, TreeConfig(n_candidate_features=None))
    assert t.feature[0] == 0


def test_xor_reaches_zero_training_error():
    # no single split reduces Gini here; growth must continue anyway
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    t = fit_tree(X, y, 2, TreeConfig(n_candidate_features=None))
    assert np.array_equal(t.predict_index(X), y)


def test_separable_blobs_training_error_zero():
    s = blobs(1, 200)
    t = fit_tree(s.X, s.y, 2, TreeConfig(), seed=3)
    assert np.array_equal(t.predict_index(s.X), s.y)


@given(st.integers(2, 60), st.integers(1, 4), st.integers(2, 4), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_unlimited_tree_fits_consistent_data_exactly(n, q, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, (n, q)).astype(float)
    _, first = np.unique(X, axis=0, return_index=True)
    X = X[np.sort(first)]                       # no duplicate feature vectors
    y = rng.integers(0, k, X.shape[0])
    t = fit_tree(X, y, k, TreeConfig(), seed=seed)
    assert np.array_equal(t.predict_index(X), y)
    internal = t.feature != LEAF
    assert np.all(t.feature[internal] < q)
    assert np.all(t.counts[~internal].sum(axis=1) >= 1)


def test_depth_and_min_split_limits():
    s = blobs(2, 300, sep=1.0, var=1.0)
    stump = fit_tree(s.X, s.y, 2, TreeConfig(max_depth=1), seed=0)
    assert stump.n_nodes == 3
    big = fit_tree(s.X, s.y, 2, TreeConfig(min_split=300), seed=0)
    assert big.n_nodes == 3
    none = fit_tree(s.X, s.y, 2, TreeConfig(min_split=301), seed=0)
    assert none.n_nodes == 1


def test_fit_tree_errors():
    with pytest.raises(ValidationError):
        fit_tree(np.empty((0, 2)), [], 2)
    with pytest.raises(ValidationError):
        fit_tree([[0.0], [1.0]], [0, -1], 2)
    with pytest.raises(ValidationError):
        fit_tree([[0.0], [1.0]], [0, 2], 2)
    with pytest.raises(ValidationError):
        TreeConfig(min_split=1)
    with pytest.raises(ValidationError):
        TreeConfig(n_candidate_features=3).candidates(2)


def test_single_unbootstrapped_tree_equals_fit_tree():
    s = blobs(3, 150, sep=1.0, var=1.0)
    cfg = TreeConfig(bootstrap=False)
    f = fit_forest(s.X, s.y, s.schema, n_trees=1, config=cfg, seed=9)
    t = fit_tree(s.X, s.y, 2, cfg, seed=mix(9, 0))
    assert f.trees[0].to_dict() == t.to_dict()


def test_forest_is_deterministic():
    s = blobs(4, 200, sep=1.5, var=1.0)
    a = fit_forest(s.X, s.y, s.schema, n_trees=20, seed=5)
    b = fit_forest(s.X, s.y, s.schema, n_trees=20, seed=5)
    c = fit_forest(s.X, s.y, s.schema, n_trees=20, seed=6)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != c.to_dict()


def test_forest_oob_error_on_separable_points():
    # measured 0.000-0.006 over seeds 0-4
    s = blobs(0, 500)
    f = fit_forest(s.X, s.y, s.schema, n_trees=100, seed=0)
    assert oob_error(f, s.X, s.y) <= 0.05


def test_forest_predicts_held_out_points():
    s = blobs(0, 500)
    f = fit_forest(s.X, s.y, s.schema, n_trees=100, seed=0)
    assert predict(f, [4.1, 3.8]) == 1
    assert predict(f, [0.1, -0.2]) == 0


def test_leaf_normalisation_and_averaging():
    one = RandomForest([leaf_tree([3, 1])], AB)
    assert predict_proba(one, [0.0]).tolist() == [0.75, 0.25]
    two = RandomForest([leaf_tree([1, 0]), leaf_tree([0, 1])], AB)
    assert predict_proba(two, [0.0]).tolist() == [0.5, 0.5]


def test_vote_tie_goes_to_first_class():
    f = RandomForest([leaf_tree([1, 0]), leaf_tree([1, 0]), leaf_tree([0, 1]),
                      leaf_tree([0, 1])], AB)
    assert predict(f, [0.0]) == "a"
    assert predict(RandomForest([leaf_tree([0, 4])] * 3, AB), [1.0]) == "b"


def test_predict_dimension_checks():
    f = RandomForest([leaf_tree([1, 0])], AB)
    with pytest.raises(ValidationError):
        predict(f, [0.0, 1.0])
    with pytest.raises(ValidationError):
        predict(f, [np.nan])
    with pytest.raises(ValidationError):
        RandomForest([], AB)


@pytest.fixture(scope="module")
def noisy_forest():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((300, 3))
    y = (X[:, 0] + 0.8 * rng.standard_normal(300) > 0).astype(int) + (X[:, 1] > 1)
    schema = StreamSchema(3, ("x", "y", "z"))
    return fit_forest(X, y, schema, n_trees=15, seed=1)


@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3))
@settings(max_examples=150, deadline=None)
def test_proba_is_a_distribution_consistent_with_predict(noisy_forest, x):
    p = predict_proba(noisy_forest, x)
    assert np.all((p >= 0) & (p <= 1))
    assert abs(p.sum() - 1.0) <= 1e-9
    assert predict(noisy_forest, x) == noisy_forest.schema.class_labels[int(np.argmax(p))]


def test_batch_and_single_predictions_agree(noisy_forest):
    X = np.random.default_rng(9).standard_normal((500, 3)) * 2
    batch = noisy_forest.predict_proba_batch(X)
    single = np.vstack([noisy_forest.predict_proba(x) for x in X])
    assert np.array_equal(batch, single)
    small = np.vstack([noisy_forest.predict_proba_batch(X[i:i + 7]) for i in range(0, 500, 7)])
    assert np.array_equal(batch, small)


def test_forest_json_round_trip(noisy_forest, tmp_path):
    p = tmp_path / "model.json"
    noisy_forest.save(p)
    back = RandomForest.load(p)
    X = np.random.default_rng(2).standard_normal((50, 3))
    assert np.array_equal(back.predict_proba_batch(X), noisy_forest.predict_proba_batch(X))
    assert back.schema == noisy_forest.schema
