import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imbalance_toolkit.errors import (
    ConflictingTargets,
    InvalidDataset,
    InvalidTargets,
    TargetBelowAvailable,
    TargetExceedsAvailable,
    UnknownClass,
)
from imbalance_toolkit.tools.data_tools import ClassDistribution, Dataset, class_distribution
from imbalance_toolkit.tools.sampling_tools import (
    SamplingTargets,
    kmeans_smote_sample,
    random_over_sample,
    random_under_sample,
    resolve_sampling_targets,
    self_paced_under_sample,
    smote_sample,
)

from conftest import blobs


def on_segment(point, a, b, tol=1e-9):
    return abs(np.linalg.norm(point - a) + np.linalg.norm(point - b) - np.linalg.norm(a - b)) <= tol


class TestResolveTargets:
    dist = ClassDistribution({0: 90, 1: 10})

    def test_under_and_over(self):
        assert resolve_sampling_targets(self.dist, "under_to_minority").as_dict() == {0: 10, 1: 10}
        assert resolve_sampling_targets(self.dist, "over_to_majority").as_dict() == {0: 90, 1: 90}

    def test_explicit_forms(self):
        assert resolve_sampling_targets(self.dist, "explicit", target_label=1,
                                        n_target_samples=50).as_dict() == {0: 90, 1: 50}
        assert resolve_sampling_targets(self.dist, "explicit", n_target_samples=30).as_dict() == {0: 30, 1: 30}
        assert resolve_sampling_targets(self.dist, "explicit", target_label=1).as_dict() == {0: 10, 1: 10}
        assert resolve_sampling_targets(self.dist, "explicit",
                                        n_target_samples={0: 40}).as_dict() == {0: 40, 1: 10}

    def test_explicit_errors(self):
        with pytest.raises(ConflictingTargets):
            resolve_sampling_targets(self.dist, "explicit", target_label=1, n_target_samples={0: 40})
        with pytest.raises(InvalidTargets):
            resolve_sampling_targets(self.dist, "explicit")
        with pytest.raises(UnknownClass):
            resolve_sampling_targets(self.dist, "explicit", target_label=5)
        with pytest.raises(InvalidTargets):
            resolve_sampling_targets(self.dist, "sideways")


def test_sampling_targets_validation():
    with pytest.raises(InvalidTargets):
        SamplingTargets({0: -1, 1: 3})
    with pytest.raises(InvalidTargets):
        SamplingTargets({0: 0, 1: 0})


@given(counts=st.lists(st.integers(min_value=2, max_value=40), min_size=2, max_size=4),
       data=st.data())
def test_samplers_hit_targets_exactly(counts, data):
    dataset = blobs(counts)
    under = {c: data.draw(st.integers(min_value=0, max_value=n)) for c, n in enumerate(counts)}
    if not any(under.values()):
        under[0] = 1
    over = {c: n + data.draw(st.integers(min_value=0, max_value=20)) for c, n in enumerate(counts)}

    reduced, _ = random_under_sample(dataset, SamplingTargets(under), seed=1)
    assert class_distribution(reduced.labels).as_dict() == {c: n for c, n in under.items() if n > 0}

    grown, trace = random_over_sample(dataset, SamplingTargets(over), seed=1)
    assert class_distribution(grown.labels).as_dict() == over
    assert trace.output_size == sum(over.values())

    synthesized, trace = smote_sample(dataset, SamplingTargets(over), seed=1)
    assert class_distribution(synthesized.labels).as_dict() == over
    assert trace.synthetic_count == sum(over.values()) - sum(counts)


def test_under_sample_errors():
    dataset = blobs([20, 5])
    with pytest.raises(TargetExceedsAvailable):
        random_under_sample(dataset, SamplingTargets({0: 5, 1: 6}))
    with pytest.raises(UnknownClass):
        random_under_sample(dataset, SamplingTargets({0: 5, 1: 5, 2: 1}))
    with pytest.raises(InvalidTargets):
        random_under_sample(dataset, SamplingTargets({0: 5}))
    resampled, _ = random_under_sample(dataset, SamplingTargets({0: 30, 1: 5}), with_replacement=True)
    assert class_distribution(resampled.labels)[0] == 30


def test_over_sample_rejects_reduction():
    with pytest.raises(TargetBelowAvailable):
        random_over_sample(blobs([20, 5]), SamplingTargets({0: 10, 1: 20}))


def test_smote_two_point_class_lies_on_diagonal():
    features = np.array([[5.0, 0.0], [6.0, 0.0], [7.0, 0.0], [0.0, 0.0], [2.0, 2.0]])
    dataset = Dataset(features, [0, 0, 0, 1, 1])
    resampled, trace = smote_sample(dataset, SamplingTargets({0: 3, 1: 3}), k_neighbors=1, seed=0)
    assert resampled.n_samples == 6
    x, y = resampled.features[-1]
    assert resampled.labels[-1] == 1
    assert x == pytest.approx(y)
    assert 0.0 <= x <= 2.0
    assert np.array_equal(resampled.features[:5], features)
    assert set(trace.synthetic_sources[0].tolist()) == {3, 4}


def test_smote_keeps_collinear_points_on_their_line():
    t = np.linspace(0.0, 1.0, 6)
    minority = np.column_stack([t, 2.0 * t + 1.0])
    majority = np.random.default_rng(0).normal(10.0, 1.0, size=(30, 2))
    dataset = Dataset(np.vstack([majority, minority]), np.repeat([0, 1], [30, 6]))
    resampled, trace = smote_sample(dataset, SamplingTargets({0: 30, 1: 30}), k_neighbors=3, seed=5)
    synthetic = resampled.features[-trace.synthetic_count:]
    assert trace.synthetic_count == 24
    assert np.allclose(synthetic[:, 1], 2.0 * synthetic[:, 0] + 1.0)


@given(seed=st.integers(min_value=0, max_value=2 ** 32), k=st.integers(min_value=1, max_value=6))
def test_smote_points_lie_between_their_sources(seed, k):
    dataset = blobs([25, 8], n_features=3, seed=seed % 1000)
    resampled, trace = smote_sample(dataset, SamplingTargets({0: 25, 1: 25}), k_neighbors=k, seed=seed)
    synthetic = resampled.features[-trace.synthetic_count:]
    for point, (a, b) in zip(synthetic, trace.synthetic_sources):
        assert dataset.labels[a] == 1 and dataset.labels[b] == 1
        assert on_segment(point, dataset.features[a], dataset.features[b])


def test_smote_single_sample_duplicates():
    features = np.vstack([np.random.default_rng(1).normal(0.0, 1.0, size=(10, 2)), [[9.0, 9.0]]])
    dataset = Dataset(features, [0] * 10 + [1])
    resampled, _ = smote_sample(dataset, SamplingTargets({0: 10, 1: 4}))
    assert np.array_equal(resampled.features[-3:], np.tile([[9.0, 9.0]], (3, 1)))


def test_smote_rejects_bad_neighbour_count():
    with pytest.raises(InvalidDataset):
        smote_sample(blobs([10, 4]), SamplingTargets({0: 10, 1: 10}), k_neighbors=0)


def test_kmeans_smote_stays_inside_minority_clusters():
    rng = np.random.default_rng(3)
    majority = rng.normal([5.0, -10.0], 0.1, size=(40, 2))
    near = rng.normal([0.0, 0.0], 0.1, size=(5, 2))
    far = rng.normal([10.0, 10.0], 0.1, size=(5, 2))
    dataset = Dataset(np.vstack([majority, near, far]), np.repeat([0, 1], [40, 10]))
    resampled, trace = kmeans_smote_sample(dataset, SamplingTargets({0: 40, 1: 40}), n_clusters=3, seed=0)
    synthetic = resampled.features[-trace.synthetic_count:]
    assert trace.synthetic_count == 30
    close_to_a_cluster = np.minimum(np.linalg.norm(synthetic - [0.0, 0.0], axis=1),
                                    np.linalg.norm(synthetic - [10.0, 10.0], axis=1))
    assert np.all(close_to_a_cluster < 1.0)


def test_kmeans_smote_within_class_bounding_box():
    dataset = blobs([40, 12], n_features=3, seed=9)
    resampled, trace = kmeans_smote_sample(dataset, SamplingTargets({0: 40, 1: 40}), n_clusters=2, seed=2)
    minority = dataset.features[dataset.labels == 1]
    synthetic = resampled.features[-trace.synthetic_count:]
    assert np.all(synthetic >= minority.min(axis=0) - 1e-12)
    assert np.all(synthetic <= minority.max(axis=0) + 1e-12)


def test_kmeans_smote_single_cluster_falls_back_to_smote():
    dataset = blobs([50, 5], seed=4)
    targets = SamplingTargets({0: 50, 1: 50})
    via_kmeans, _ = kmeans_smote_sample(dataset, targets, n_clusters=1, seed=8)
    via_smote, _ = smote_sample(dataset, targets, seed=8)
    assert np.array_equal(via_kmeans.features, via_smote.features)


def test_self_paced_budgets_follow_bin_hardness():
    features = np.random.default_rng(0).normal(size=(70, 2))
    labels = np.repeat([0, 1], [60, 10])
    hardness = np.concatenate([np.zeros(30), np.ones(30), np.full(10, 0.5)])
    dataset = Dataset(features, labels)
    resampled, trace = self_paced_under_sample(dataset, SamplingTargets({0: 30, 1: 10}), hardness,
                                               k_bins=2, alpha=1.0, seed=0)
    kept = trace.kept_indices
    assert class_distribution(resampled.labels).as_dict() == {0: 30, 1: 10}
    assert int(np.sum(kept < 30)) == 20
    assert int(np.sum((kept >= 30) & (kept < 60))) == 10


def test_self_paced_rejects_bad_hardness():
    dataset = blobs([20, 5])
    targets = SamplingTargets({0: 5, 1: 5})
    with pytest.raises(InvalidDataset):
        self_paced_under_sample(dataset, targets, np.full(25, 1.5))
    with pytest.raises(InvalidDataset):
        self_paced_under_sample(dataset, targets, np.zeros(24))
