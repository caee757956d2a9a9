import numpy as np
import pytest

from imbalance_toolkit.errors import DegenerateWeights, InvalidConfig, ShapeMismatch
from imbalance_toolkit.tools.data_tools import Dataset
from imbalance_toolkit.tools.tree_tools import FittedTree, TreeParams, fit_tree, tree_predict_proba

from conftest import blobs


def grid_dataset(seed=0):
    xs, ys = np.meshgrid(np.arange(10.0), np.arange(10.0))
    features = np.column_stack([xs.ravel(), ys.ravel()])
    labels = np.random.default_rng(seed).integers(0, 2, size=100)
    return Dataset(features, labels, n_classes=2)


def test_pure_node_is_a_single_leaf():
    dataset = Dataset(np.arange(6.0).reshape(3, 2), [0, 0, 0], n_classes=2)
    tree = fit_tree(dataset)
    assert tree.n_nodes == 1
    assert tree.value.tolist() == [[1.0, 0.0]]


def test_xor_is_learned_at_depth_two():
    features = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    dataset = Dataset(features, [0, 1, 1, 0])
    tree = fit_tree(dataset, params=TreeParams(max_depth=2))
    assert tree.predict(features).tolist() == [0, 1, 1, 0]
    assert tree.n_leaves == 4


def test_depth_one_is_a_stump():
    tree = fit_tree(grid_dataset(), params=TreeParams(max_depth=1))
    assert tree.n_nodes == 3


def test_zero_weight_rows_are_ignored():
    dataset = grid_dataset(1)
    weights = np.ones(100)
    weights[::3] = 0.0
    weighted = fit_tree(dataset, sample_weights=weights)
    subset = fit_tree(dataset.subset(np.flatnonzero(weights > 0)))
    assert weighted.to_dict() == subset.to_dict()


def test_duplicating_a_row_equals_doubling_its_weight():
    dataset = grid_dataset(2)
    doubled = np.random.default_rng(5).random(100) < 0.3
    weights = np.where(doubled, 2.0, 1.0)
    with_weights = fit_tree(dataset, sample_weights=weights)
    duplicated = fit_tree(dataset.subset(np.concatenate([np.arange(100), np.flatnonzero(doubled)])))
    assert with_weights.to_dict() == duplicated.to_dict()


def test_predictions_survive_monotone_feature_transforms():
    dataset = blobs([60, 20], n_features=3, separation=1.5, seed=3)
    transformed = Dataset(dataset.features ** 3 + 2.0 * dataset.features, dataset.labels)
    original_tree = fit_tree(dataset, params=TreeParams(max_depth=4))
    transformed_tree = fit_tree(transformed, params=TreeParams(max_depth=4))
    assert np.array_equal(original_tree.predict(dataset.features), transformed_tree.predict(transformed.features))


def test_feature_subsets_are_seeded():
    dataset = blobs([50, 20], n_features=9, separation=1.0, seed=6)
    params = TreeParams(max_depth=5, max_features="sqrt")
    assert params.n_candidate_features(9) == 3
    assert fit_tree(dataset, params=params, seed=11).to_dict() == fit_tree(dataset, params=params, seed=11).to_dict()


def test_min_samples_leaf_is_respected():
    dataset = grid_dataset(3)
    tree = fit_tree(dataset, params=TreeParams(max_depth=None, min_samples_leaf=7))
    leaves, counts = np.unique(tree.apply(dataset.features), return_counts=True)
    assert np.all(counts >= 7)


def test_probability_rows_sum_to_one_and_serialize():
    dataset = blobs([30, 10, 5], seed=2)
    tree = fit_tree(dataset, params=TreeParams(max_depth=3))
    proba = tree_predict_proba(tree, dataset.features)
    assert proba.shape == (45, 3)
    assert np.allclose(proba.sum(axis=1), 1.0)
    restored = FittedTree.from_dict(tree.to_dict())
    assert np.array_equal(restored.predict_proba(dataset.features), proba)


def test_bad_inputs():
    dataset = grid_dataset()
    with pytest.raises(ShapeMismatch):
        fit_tree(dataset, sample_weights=np.ones(99))
    with pytest.raises(DegenerateWeights):
        fit_tree(dataset, sample_weights=np.zeros(100))
    with pytest.raises(DegenerateWeights):
        fit_tree(dataset, sample_weights=-np.ones(100))
    tree = fit_tree(dataset, params=TreeParams(max_depth=2))
    with pytest.raises(ShapeMismatch):
        tree.predict(np.zeros((4, 3)))
    with pytest.raises(InvalidConfig):
        TreeParams(max_depth=0)
    with pytest.raises(InvalidConfig):
        TreeParams(max_features="log2")
