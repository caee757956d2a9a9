from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.cluster import KMeans
from sklearn.neighbors import NearestNeighbors

from ..errors import (
    ConflictingTargets,
    InvalidDataset,
    InvalidTargets,
    TargetBelowAvailable,
    TargetExceedsAvailable,
    UnknownClass,
)
from .data_tools import ClassDistribution, Dataset, class_distribution
from .shared_tools import derive_seed, largest_remainder, make_rng

logger = logging.getLogger(__name__)

SAMPLING_MODES = ("under_to_minority", "over_to_majority", "explicit")


@dataclass(frozen=True)
class SamplingTargets:
    """Desired sample count per class id."""

    targets: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        targets = {int(c): int(n) for c, n in sorted(self.targets.items())}
        if not targets:
            raise InvalidTargets("sampling targets must name at least one class")
        negative = [c for c, n in targets.items() if n < 0]
        if negative:
            raise InvalidTargets(f"sampling targets must be nonnegative; class {negative[0]} is negative")
        if not any(n > 0 for n in targets.values()):
            raise InvalidTargets("at least one sampling target must be positive")
        object.__setattr__(self, 'targets', targets)

    def __getitem__(self, class_id: int) -> int:
        return self.targets[class_id]

    def get(self, class_id: int, default: Optional[int] = None) -> Optional[int]:
        return self.targets.get(class_id, default)

    def as_dict(self) -> Dict[int, int]:
        return dict(self.targets)


@dataclass(frozen=True, eq=False)
class ResampleTrace:
    """
    Where every output row came from.

    Output rows are `kept_indices` (source rows, possibly repeated) followed by
    `synthetic_count` generated rows. `synthetic_sources[k]` holds the (seed, neighbour)
    source row pair the k-th synthetic row was interpolated from.
    """

    kept_indices: np.ndarray
    synthetic_count: int = 0
    synthetic_sources: Optional[np.ndarray] = None

    @property
    def output_size(self) -> int:
        return int(len(self.kept_indices) + self.synthetic_count)


def check_targets(dist: ClassDistribution, targets: SamplingTargets) -> None:
    """Every dataset class needs a target and every target must name a dataset class."""
    for class_id in targets.targets:
        if class_id not in dist:
            raise UnknownClass(f"class {class_id} does not occur in the dataset")
    missing = [c for c in dist.classes if c not in targets.targets]
    if missing:
        raise InvalidTargets(f"no sampling target for class {missing[0]}")


def resolve_sampling_targets(
    dist: ClassDistribution,
    mode: str = "under_to_minority",
    target_label: Optional[int] = None,
    n_target_samples: Optional[Union[int, Mapping[int, int]]] = None,
) -> SamplingTargets:
    """
    Turn a sampling mode plus the optional target_label / n_target_samples into targets.

    Modes:
        under_to_minority: every class goes to the minority count
        over_to_majority: every class goes to the majority count
        explicit: a map is passed through (missing classes keep their counts);
            a scalar with target_label sets only that class; a scalar alone sets
            every class; target_label alone sets every class to that class's count

    Returns:
        SamplingTargets covering every class of `dist`
    """
    if mode not in SAMPLING_MODES:
        raise InvalidTargets(f"unknown sampling mode '{mode}', expected one of {SAMPLING_MODES}")
    if target_label is not None and int(target_label) not in dist:
        raise UnknownClass(f"target_label {target_label} does not occur in the dataset")

    if mode == "under_to_minority":
        return SamplingTargets({c: dist.minority_count for c in dist.classes})
    if mode == "over_to_majority":
        return SamplingTargets({c: dist.majority_count for c in dist.classes})

    targets = dist.as_dict()
    if isinstance(n_target_samples, Mapping):
        for class_id in n_target_samples:
            if int(class_id) not in dist:
                raise UnknownClass(f"class {class_id} in n_target_samples does not occur in the dataset")
        if target_label is not None and int(target_label) not in {int(c) for c in n_target_samples}:
            raise ConflictingTargets(
                f"target_label {target_label} has no entry in the n_target_samples map")
        targets.update({int(c): int(n) for c, n in n_target_samples.items()})
    elif n_target_samples is not None:
        if target_label is not None:
            targets[int(target_label)] = int(n_target_samples)
        else:
            targets = {c: int(n_target_samples) for c in dist.classes}
    elif target_label is not None:
        targets = {c: dist[int(target_label)] for c in dist.classes}
    else:
        raise InvalidTargets("explicit sampling needs target_label and/or n_target_samples")
    return SamplingTargets(targets)


def _class_rows(dataset: Dataset, class_id: int) -> np.ndarray:
    return np.flatnonzero(dataset.labels == class_id)


def _assemble(dataset: Dataset, kept: np.ndarray, synthetic: List[np.ndarray],
              synthetic_labels: List[np.ndarray], sources: List[np.ndarray]) -> Tuple[Dataset, ResampleTrace]:
    kept = np.asarray(kept, dtype=np.int64)
    features = dataset.features[kept]
    labels = dataset.labels[kept]
    synthetic_count = 0
    synthetic_sources = np.zeros((0, 2), dtype=np.int64)
    if synthetic:
        new_rows = np.vstack(synthetic)
        synthetic_count = new_rows.shape[0]
        features = np.vstack([features, new_rows])
        labels = np.concatenate([labels, np.concatenate(synthetic_labels)])
        synthetic_sources = np.vstack(sources)
    trace = ResampleTrace(kept_indices=kept, synthetic_count=synthetic_count, synthetic_sources=synthetic_sources)
    return dataset.with_rows(features, labels), trace


def random_under_sample(
    dataset: Dataset,
    targets: SamplingTargets,
    with_replacement: bool = False,
    seed: int = 0,
) -> Tuple[Dataset, ResampleTrace]:
    """Uniformly draw `targets[c]` rows of every class c (row order preserved)."""
    dist = class_distribution(dataset.labels)
    check_targets(dist, targets)
    rng = make_rng(seed)

    kept = []
    for class_id in dist.classes:
        target = targets[class_id]
        if not with_replacement and target > dist[class_id]:
            raise TargetExceedsAvailable(
                f"class {class_id}: target {target} exceeds the {dist[class_id]} available samples")
        kept.append(rng.choice(_class_rows(dataset, class_id), size=target, replace=with_replacement))

    kept = np.sort(np.concatenate(kept))
    logger.debug(f"Under-sampled {dataset.n_samples} rows to {len(kept)}")
    return _assemble(dataset, kept, [], [], [])


def random_over_sample(
    dataset: Dataset,
    targets: SamplingTargets,
    seed: int = 0,
) -> Tuple[Dataset, ResampleTrace]:
    """Keep every row and fill each class deficit by duplicating random rows of that class."""
    dist = class_distribution(dataset.labels)
    check_targets(dist, targets)
    _check_not_below(dist, targets)
    rng = make_rng(seed)

    duplicates = []
    for class_id in dist.classes:
        deficit = targets[class_id] - dist[class_id]
        if deficit > 0:
            duplicates.append(rng.choice(_class_rows(dataset, class_id), size=deficit, replace=True))

    kept = np.concatenate([np.arange(dataset.n_samples)] + duplicates)
    logger.debug(f"Over-sampled {dataset.n_samples} rows to {len(kept)}")
    return _assemble(dataset, kept, [], [], [])


def _check_not_below(dist: ClassDistribution, targets: SamplingTargets) -> None:
    for class_id in dist.classes:
        if targets[class_id] < dist[class_id]:
            raise TargetBelowAvailable(
                f"class {class_id}: target {targets[class_id]} is below the {dist[class_id]} available samples")


def _interpolate(
    features: np.ndarray,
    rows: np.ndarray,
    n_new: int,
    k_neighbors: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    SMOTE interpolation among `features[rows]`.

    Returns:
        (synthetic points, seed source rows, neighbour source rows)
    """
    points = features[rows]
    n_points = len(rows)
    if n_points == 1:
        logger.warning("Only one sample available for SMOTE; duplicating it")
        picks = np.zeros(n_new, dtype=np.int64)
        return points[picks].copy(), rows[picks], rows[picks]

    k = min(k_neighbors, n_points - 1)
    neighbours = NearestNeighbors(n_neighbors=k + 1).fit(points).kneighbors(points, return_distance=False)
    # Drop each point itself; with exact duplicates it is not always in column 0
    without_self = np.empty((n_points, k), dtype=np.int64)
    for i, row in enumerate(neighbours):
        others = row[row != i]
        without_self[i] = others[:k]

    seeds = rng.integers(0, n_points, size=n_new)
    chosen = without_self[seeds, rng.integers(0, k, size=n_new)]
    gaps = rng.random(n_new)[:, None]
    synthetic = points[seeds] + gaps * (points[chosen] - points[seeds])
    return synthetic, rows[seeds], rows[chosen]


def smote_sample(
    dataset: Dataset,
    targets: SamplingTargets,
    k_neighbors: int = 5,
    seed: int = 0,
) -> Tuple[Dataset, ResampleTrace]:
    """
    Fill every class deficit with SMOTE points x_i + u * (x_z - x_i).

    x_i is a random row of the class and x_z one of its k nearest same-class
    neighbours. Originals come first, synthetic rows follow grouped by class.
    """
    if k_neighbors < 1:
        raise InvalidDataset(f"k_neighbors must be at least 1, got {k_neighbors}")
    dist = class_distribution(dataset.labels)
    check_targets(dist, targets)
    _check_not_below(dist, targets)
    rng = make_rng(seed)

    synthetic, synthetic_labels, sources = [], [], []
    for class_id in dist.classes:
        deficit = targets[class_id] - dist[class_id]
        if deficit <= 0:
            continue
        points, seed_rows, neighbour_rows = _interpolate(
            dataset.features, _class_rows(dataset, class_id), deficit, k_neighbors, rng)
        synthetic.append(points)
        synthetic_labels.append(np.full(deficit, class_id, dtype=np.int64))
        sources.append(np.column_stack([seed_rows, neighbour_rows]))

    logger.debug(f"SMOTE generated {sum(len(s) for s in synthetic)} synthetic rows")
    return _assemble(dataset, np.arange(dataset.n_samples), synthetic, synthetic_labels, sources)


def _cluster_sparsity(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(np.mean(pdist(points)))


def kmeans_smote_sample(
    dataset: Dataset,
    targets: SamplingTargets,
    n_clusters: int = 2,
    k_neighbors: int = 5,
    imbalance_ratio_threshold: float = 0.5,
    seed: int = 0,
) -> Tuple[Dataset, ResampleTrace]:
    """
    SMOTE restricted to k-means clusters where the class is well represented.

    Lloyd's k-means (k-means++ init, 100 iterations, tol 1e-4) runs on every row.
    A cluster is eligible for class c when at least `imbalance_ratio_threshold` of its
    rows (and at least two rows) belong to c. The class deficit is split over the
    eligible clusters in proportion to the mean pairwise distance of their class-c
    members and interpolation stays inside each cluster. Classes without an eligible
    cluster fall back to plain SMOTE over the whole class.
    """
    if n_clusters < 1:
        raise InvalidDataset(f"n_clusters must be at least 1, got {n_clusters}")
    if k_neighbors < 1:
        raise InvalidDataset(f"k_neighbors must be at least 1, got {k_neighbors}")
    dist = class_distribution(dataset.labels)
    check_targets(dist, targets)
    _check_not_below(dist, targets)

    n_clusters = min(n_clusters, dataset.n_samples)
    clusters = KMeans(
        n_clusters=n_clusters,
        init='k-means++',
        n_init=1,
        max_iter=100,
        tol=1e-4,
        algorithm='lloyd',
        random_state=derive_seed(seed, "kmeans") % (2 ** 32),
    ).fit_predict(dataset.features)
    rng = make_rng(seed)

    synthetic, synthetic_labels, sources = [], [], []
    for class_id in dist.classes:
        deficit = targets[class_id] - dist[class_id]
        if deficit <= 0:
            continue
        in_class = dataset.labels == class_id

        eligible = []
        for cluster_id in range(n_clusters):
            in_cluster = clusters == cluster_id
            members = np.flatnonzero(in_cluster & in_class)
            if len(members) >= 2 and len(members) / in_cluster.sum() >= imbalance_ratio_threshold:
                eligible.append(members)

        if not eligible:
            logger.warning(f"No eligible k-means cluster for class {class_id}; falling back to SMOTE")
            groups, budgets = [np.flatnonzero(in_class)], [deficit]
        else:
            sparsity = np.array([_cluster_sparsity(dataset.features[m]) for m in eligible])
            if sparsity.sum() <= 0:
                sparsity = np.ones(len(eligible))
            groups, budgets = eligible, largest_remainder(deficit, sparsity)

        for rows, budget in zip(groups, budgets):
            if budget <= 0:
                continue
            points, seed_rows, neighbour_rows = _interpolate(dataset.features, rows, int(budget), k_neighbors, rng)
            synthetic.append(points)
            synthetic_labels.append(np.full(int(budget), class_id, dtype=np.int64))
            sources.append(np.column_stack([seed_rows, neighbour_rows]))

    logger.debug(f"k-means SMOTE generated {sum(len(s) for s in synthetic)} synthetic rows")
    return _assemble(dataset, np.arange(dataset.n_samples), synthetic, synthetic_labels, sources)


def _bin_budgets(target: int, weights: np.ndarray, populations: np.ndarray) -> np.ndarray:
    """Largest-remainder budgets by weight, capped at each bin's population."""
    budgets = np.zeros(len(weights), dtype=np.int64)
    open_bins = populations > 0
    remaining = target
    while remaining > 0 and open_bins.any():
        share = largest_remainder(remaining, np.where(open_bins, weights, 0.0))
        if share.sum() == 0:
            share = largest_remainder(remaining, open_bins.astype(float))
        proposal = budgets + share
        over = proposal > populations
        budgets = np.minimum(proposal, populations)
        remaining = target - int(budgets.sum())
        open_bins = open_bins & ~over & (budgets < populations)
    return budgets


def self_paced_bin_weights(mean_hardness: np.ndarray, populations: np.ndarray, alpha: float) -> np.ndarray:
    """Bin weight 1 / (mean hardness + alpha); empty bins weigh 0, zero denominators take everything."""
    nonempty = populations > 0
    denominators = mean_hardness + alpha
    zero = nonempty & (denominators <= 0)
    if zero.any():
        return zero.astype(float)
    weights = np.zeros(len(populations))
    weights[nonempty] = 1.0 / denominators[nonempty]
    return weights


def self_paced_under_sample(
    dataset: Dataset,
    targets: SamplingTargets,
    hardness: Sequence[float],
    k_bins: int = 5,
    alpha: float = 0.0,
    seed: int = 0,
) -> Tuple[Dataset, ResampleTrace]:
    """
    Hardness-harmonized under-sampling.

    Every class that needs reduction is cut into `k_bins` equal-width hardness bins
    over its own [min, max] hardness; bin b gets a budget proportional to
    1 / (mean hardness of b + alpha) and rows are drawn uniformly within bins.
    """
    hardness = np.asarray(hardness, dtype=float)
    if hardness.shape != (dataset.n_samples,):
        raise InvalidDataset(f"hardness has {hardness.size} values for {dataset.n_samples} rows")
    if np.any(~np.isfinite(hardness)) or np.any(hardness < 0) or np.any(hardness > 1):
        raise InvalidDataset("hardness values must lie in [0, 1]")
    if k_bins < 1:
        raise InvalidDataset(f"k_bins must be at least 1, got {k_bins}")
    if alpha < 0:
        raise InvalidDataset(f"alpha must be nonnegative, got {alpha}")
    dist = class_distribution(dataset.labels)
    check_targets(dist, targets)
    rng = make_rng(seed)

    kept = []
    for class_id in dist.classes:
        rows = _class_rows(dataset, class_id)
        target = targets[class_id]
        if target > len(rows):
            raise TargetExceedsAvailable(
                f"class {class_id}: target {target} exceeds the {len(rows)} available samples")
        if target == len(rows):
            kept.append(rows)
            continue

        class_hardness = hardness[rows]
        low, high = class_hardness.min(), class_hardness.max()
        width = (high - low) / k_bins
        if width > 0:
            bins = np.minimum(((class_hardness - low) / width).astype(np.int64), k_bins - 1)
        else:
            bins = np.zeros(len(rows), dtype=np.int64)

        populations = np.bincount(bins, minlength=k_bins)
        sums = np.bincount(bins, weights=class_hardness, minlength=k_bins)
        mean_hardness = np.divide(sums, populations, out=np.zeros(k_bins), where=populations > 0)
        budgets = _bin_budgets(target, self_paced_bin_weights(mean_hardness, populations, alpha), populations)

        for b in range(k_bins):
            if budgets[b] > 0:
                kept.append(rng.choice(rows[bins == b], size=int(budgets[b]), replace=False))

    kept = np.sort(np.concatenate(kept))
    logger.debug(f"Self-paced under-sampling kept {len(kept)} of {dataset.n_samples} rows (alpha={alpha:.4g})")
    return _assemble(dataset, kept, [], [], [])
