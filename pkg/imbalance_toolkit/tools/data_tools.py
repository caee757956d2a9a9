from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.stats import special_ortho_group

from ..errors import (
    EmptyDataset,
    InsufficientClassSamples,
    InvalidDataset,
    InvalidFraction,
    InvalidTargets,
    InvalidWeights,
    TargetExceedsAvailable,
    UnknownClass,
)
from .shared_tools import derive_seed, largest_remainder, make_rng, round_half_up

logger = logging.getLogger(__name__)

# Pairwise distance between generated Gaussian cluster means
CLUSTER_SEPARATION = 3.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus integer class labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    class_names: Optional[Tuple[str, ...]] = None
    n_classes: Optional[int] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, 0)
        if features.ndim != 2:
            raise InvalidDataset(f"features must be a 2-D matrix, got {features.ndim} dimension(s)")
        if not np.all(np.isfinite(features)):
            raise InvalidDataset("features contain NaN or infinite values")

        raw_labels = np.asarray(self.labels)
        if raw_labels.size and not np.issubdtype(raw_labels.dtype, np.integer):
            as_float = raw_labels.astype(float)
            if not np.all(as_float == np.round(as_float)):
                raise InvalidDataset("labels must be integer class ids; encode them first")
        labels = raw_labels.astype(np.int64).reshape(-1)
        if features.shape[0] != labels.shape[0]:
            raise InvalidDataset(
                f"feature rows ({features.shape[0]}) do not match label count ({labels.shape[0]})")

        class_names = tuple(str(n) for n in self.class_names) if self.class_names is not None else None
        n_classes = self.n_classes
        if n_classes is None:
            if class_names is not None:
                n_classes = len(class_names)
            else:
                n_classes = int(labels.max()) + 1 if labels.size else 0
        n_classes = int(n_classes)
        if class_names is not None and len(class_names) != n_classes:
            raise InvalidDataset(f"{len(class_names)} class names given for {n_classes} classes")
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise InvalidDataset(f"labels must lie in [0, {n_classes})")

        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'class_names', class_names)
        object.__setattr__(self, 'n_classes', n_classes)

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        """Rows at `indices` (repeats allowed), keeping class count and names."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices],
                       class_names=self.class_names, n_classes=self.n_classes)

    def with_rows(self, features: np.ndarray, labels: np.ndarray) -> 'Dataset':
        """A new dataset sharing this one's class count and names."""
        return Dataset(features, labels, class_names=self.class_names, n_classes=self.n_classes)

    def class_name(self, class_id: int) -> str:
        if self.class_names is not None:
            return self.class_names[class_id]
        return str(class_id)


@dataclass(frozen=True)
class ClassDistribution:
    """Sample count per class id, sorted by class id."""

    counts: Dict[int, int] = field(default_factory=dict)

    def __getitem__(self, class_id: int) -> int:
        return self.counts[class_id]

    def __contains__(self, class_id: int) -> bool:
        return class_id in self.counts

    @property
    def classes(self) -> List[int]:
        return sorted(self.counts)

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    @property
    def minority_count(self) -> int:
        return min(self.counts.values())

    @property
    def majority_count(self) -> int:
        return max(self.counts.values())

    def as_dict(self) -> Dict[int, int]:
        return dict(self.counts)


def class_distribution(labels: Sequence[int]) -> ClassDistribution:
    """Tally labels into a ClassDistribution."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise EmptyDataset("cannot compute the class distribution of an empty label sequence")
    classes, counts = np.unique(labels, return_counts=True)
    return ClassDistribution({int(c): int(n) for c, n in zip(classes, counts)})


def _cluster_means(n_classes: int, n_features: int, rng: np.random.Generator) -> np.ndarray:
    """Vertices of a regular simplex with edge CLUSTER_SEPARATION, randomly rotated."""
    vertices = np.eye(n_classes) * (CLUSTER_SEPARATION / np.sqrt(2.0))
    centered = vertices - vertices.mean(axis=0)
    u, s, _ = np.linalg.svd(centered)
    coords = u[:, :n_classes - 1] * s[:n_classes - 1]

    if n_features >= n_classes - 1:
        coords = np.hstack([coords, np.zeros((n_classes, n_features - coords.shape[1]))])
    else:
        logger.warning(
            f"{n_features} feature(s) cannot hold {n_classes} equidistant cluster means; projecting")
        coords = coords[:, :n_features]

    if n_features >= 2:
        rotation = special_ortho_group.rvs(n_features, random_state=rng)
        coords = coords @ rotation.T
    return coords


def generate_imbalance_data(
    n_samples: int = 200,
    class_weights: Sequence[float] = (0.9, 0.1),
    n_features: int = 2,
    test_fraction: float = 0.5,
    seed: int = 0,
) -> Tuple[Dataset, Dataset]:
    """
    Generate an imbalanced multi-class dataset of Gaussian clusters and split it.

    Args:
        n_samples: total number of rows before the split
        class_weights: relative class proportions (normalized, all must be positive)
        n_features: feature dimension
        test_fraction: share of each class placed in the test split
        seed: master seed

    Returns:
        (train, test) datasets, split stratified by class
    """
    weights = np.asarray(list(class_weights), dtype=float)
    if weights.size == 0:
        raise InvalidWeights("class_weights must not be empty")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise InvalidWeights(f"class weights must all be positive, got {weights.tolist()}")
    if not 0.0 < test_fraction < 1.0:
        raise InvalidFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n_features < 1:
        raise InvalidDataset(f"n_features must be at least 1, got {n_features}")
    n_classes = len(weights)
    if n_samples < n_classes:
        raise InvalidDataset(f"n_samples ({n_samples}) must be at least the number of classes ({n_classes})")

    totals = largest_remainder(n_samples, weights)
    logger.info(f"Generating {n_samples} samples over {n_classes} classes: {totals.tolist()}")

    rng = make_rng(derive_seed(seed, "generate"))
    means = _cluster_means(n_classes, n_features, rng)
    blocks = [rng.standard_normal((int(total), n_features)) + means[c] for c, total in enumerate(totals)]
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(n_classes), totals)
    order = rng.permutation(n_samples)

    dataset = Dataset(features[order], labels[order], n_classes=n_classes)
    return train_test_split(dataset, test_fraction, stratified=True, seed=derive_seed(seed, "split"),
                            singletons_to_train=True)


def _target_mapping(target_counts: Any) -> Mapping[int, int]:
    return getattr(target_counts, 'targets', target_counts)


def make_imbalance(dataset: Dataset, target_counts: Any, seed: int = 0) -> Dataset:
    """
    Subsample a dataset without replacement down to per-class target counts.

    Classes missing from `target_counts` keep every row. Row order is preserved.

    Args:
        dataset: source dataset
        target_counts: SamplingTargets or mapping class id -> desired count
        seed: seed for the row draw

    Returns:
        The subsampled dataset
    """
    targets = _target_mapping(target_counts)
    dist = class_distribution(dataset.labels)
    for class_id in targets:
        if int(class_id) not in dist:
            raise UnknownClass(f"class {class_id} does not occur in the dataset")

    rng = make_rng(seed)
    kept = []
    for class_id in dist.classes:
        available = dist[class_id]
        target = int(targets.get(class_id, available))
        if target < 0:
            raise InvalidTargets(f"class {class_id}: target {target} is negative")
        if target > available:
            raise TargetExceedsAvailable(
                f"class {class_id}: target {target} exceeds the {available} available samples")
        rows = np.flatnonzero(dataset.labels == class_id)
        kept.append(rng.choice(rows, size=target, replace=False))

    indices = np.sort(np.concatenate(kept))
    logger.debug(f"make_imbalance kept {len(indices)} of {dataset.n_samples} rows")
    return dataset.subset(indices)


def _clamped_test_count(count: int, fraction: float) -> int:
    return min(max(round_half_up(count * fraction), 1), count - 1)


def train_test_split(
    dataset: Dataset,
    test_fraction: float = 0.5,
    stratified: bool = True,
    seed: int = 0,
    singletons_to_train: bool = False,
) -> Tuple[Dataset, Dataset]:
    """
    Partition rows into (train, test).

    Stratified mode draws round(count * fraction) test rows per class, keeping at
    least one row of every class on each side. Both parts keep the original row order.
    With singletons_to_train a class holding a single row goes wholly to train
    instead of raising; the generator relies on this for extreme weights.
    """
    if not 0.0 < test_fraction < 1.0:
        raise InvalidFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if dataset.n_samples < 2 and not singletons_to_train:
        raise InsufficientClassSamples("a split needs at least 2 rows")

    rng = make_rng(seed)
    if stratified:
        test_rows = []
        for class_id in class_distribution(dataset.labels).classes:
            rows = np.flatnonzero(dataset.labels == class_id)
            if len(rows) == 1 and singletons_to_train:
                continue
            if len(rows) < 2:
                raise InsufficientClassSamples(
                    f"class {class_id} has {len(rows)} sample(s); a stratified split needs at least 2")
            test_rows.append(rng.choice(rows, size=_clamped_test_count(len(rows), test_fraction), replace=False))
        test_index = np.concatenate(test_rows) if test_rows else np.empty(0, dtype=np.int64)
    else:
        test_index = rng.choice(dataset.n_samples, size=_clamped_test_count(dataset.n_samples, test_fraction),
                                replace=False)

    in_test = np.zeros(dataset.n_samples, dtype=bool)
    in_test[test_index] = True
    train = dataset.subset(np.flatnonzero(~in_test))
    test = dataset.subset(np.flatnonzero(in_test))
    logger.debug(f"Split {dataset.n_samples} rows into {train.n_samples} train / {test.n_samples} test")
    return train, test
