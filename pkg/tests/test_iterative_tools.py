import math

import numpy as np
import pytest

from imbalance_toolkit.errors import TooFewMajority
from imbalance_toolkit.tools.ensemble_tools import TrainConfig
from imbalance_toolkit.tools.iterative_tools import (
    cascade_keep_factor,
    cascade_pool_size,
    fit_balance_cascade,
    fit_self_paced_ensemble,
    fit_single_tree,
    hardness_from_proba,
    self_paced_alpha,
)

from conftest import blobs


def test_self_paced_alpha_grows_from_zero():
    assert self_paced_alpha(0, 10) == 0.0
    assert self_paced_alpha(5, 10) == pytest.approx(math.tan(math.pi / 4))
    values = [self_paced_alpha(i, 10) for i in range(10)]
    assert values == sorted(values)


def test_hardness_from_proba():
    proba = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
    hardness = hardness_from_proba(proba, np.array([0, 0, 1]))
    assert np.allclose(hardness, [0.1, 0.8, 0.5])
    assert np.all((hardness >= 0) & (hardness <= 1))


def test_self_paced_single_member_is_a_random_under_sample(binary_blobs):
    model = fit_self_paced_ensemble(binary_blobs, TrainConfig(n_estimators=1, train_verbose=1))
    assert model.n_members == 1
    assert model.training_log.records[0].class_counts == {0: 10, 1: 10}


def test_self_paced_members_are_balanced(three_class_blobs):
    model = fit_self_paced_ensemble(three_class_blobs, TrainConfig(n_estimators=5, train_verbose=1))
    assert model.n_members == 5
    assert model.vote_weights == [1.0] * 5
    for record in model.training_log.records:
        assert record.class_counts == {0: 4, 1: 4, 2: 4}


def test_self_paced_is_deterministic(tiny_dataset):
    first = fit_self_paced_ensemble(tiny_dataset, TrainConfig(n_estimators=4, seed=12))
    second = fit_self_paced_ensemble(tiny_dataset, TrainConfig(n_estimators=4, seed=12))
    assert np.array_equal(first.predict_proba(tiny_dataset.features), second.predict_proba(tiny_dataset.features))


def test_cascade_pool_size_schedule():
    assert [cascade_pool_size(100, 10, r, 3) for r in range(3)] == [100, 32, 10]
    assert cascade_keep_factor(100, 10, 3) == pytest.approx(math.sqrt(0.1))
    assert cascade_pool_size(100, 10, 0, 1) == 100


def test_cascade_pools_shrink_to_the_minority():
    dataset = blobs([100, 10])
    model = fit_balance_cascade(dataset, TrainConfig(n_estimators=3))
    assert [sizes[0] for sizes in model.diagnostics['pool_sizes']] == [100, 32, 10]


def test_cascade_removes_only_correctly_classified_rows():
    dataset = blobs([100, 10])
    model = fit_balance_cascade(dataset, TrainConfig(n_estimators=3))
    removed = model.diagnostics['removed_rows'][0]
    assert len(removed) == 68
    assert np.all(dataset.labels[removed] == 0)
    first_member = model.members[0].estimator
    assert np.all(first_member.predict(dataset.features[removed]) == 0)


def test_cascade_needs_a_majority_class():
    with pytest.raises(TooFewMajority):
        fit_balance_cascade(blobs([20, 20]), TrainConfig(n_estimators=3))


def test_cascade_multiclass_keeps_minority_whole(three_class_blobs):
    model = fit_balance_cascade(three_class_blobs, TrainConfig(n_estimators=3, train_verbose=1))
    for sizes in model.diagnostics['pool_sizes']:
        assert set(sizes) == {0, 1}
    assert model.diagnostics['pool_sizes'][0] == {0: 40, 1: 10}


def test_single_tree_baseline(binary_blobs):
    model = fit_single_tree(binary_blobs, TrainConfig(n_estimators=50))
    assert model.n_members == 1
    assert model.method_id == "decision-tree"
    assert np.array_equal(model.predict(binary_blobs.features), binary_blobs.labels)
