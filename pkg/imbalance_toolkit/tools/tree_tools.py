"""Weighted CART decision tree used as the base estimator of every ensemble."""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union
import logging
import math

import numpy as np

from ..errors import DegenerateWeights, InvalidConfig, ShapeMismatch
from .data_tools import Dataset
from .shared_tools import make_rng

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    """
    CART growth limits.

    max_features is "all", "sqrt" or a feature count drawn per node.
    The split criterion is always weighted Gini impurity.
    """

    max_depth: Optional[int] = 10
    min_samples_leaf: int = 1
    max_features: Union[str, int] = "all"

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidConfig(f"max_depth must be at least 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise InvalidConfig(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")
        if isinstance(self.max_features, str):
            if self.max_features not in ("all", "sqrt"):
                raise InvalidConfig(f"max_features must be 'all', 'sqrt' or a count, got '{self.max_features}'")
        elif int(self.max_features) < 1:
            raise InvalidConfig(f"max_features must be at least 1, got {self.max_features}")

    def n_candidate_features(self, n_features: int) -> int:
        if self.max_features == "all":
            return n_features
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        return min(int(self.max_features), n_features)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_depth': self.max_depth,
            'min_samples_leaf': self.min_samples_leaf,
            'max_features': self.max_features,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TreeParams':
        return cls(max_depth=data.get('max_depth'), min_samples_leaf=data.get('min_samples_leaf', 1),
                   max_features=data.get('max_features', 'all'))


@dataclass(frozen=True, eq=False)
class FittedTree:
    """
    A fitted tree stored as parallel node arrays.

    Internal node i sends x to `left[i]` when x[feature[i]] <= threshold[i] and to
    `right[i]` otherwise; leaves have feature == -1 and carry a class-probability row.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    kind = "tree"

    @property
    def n_classes(self) -> int:
        return int(self.value.shape[1])

    @property
    def n_nodes(self) -> int:
        return int(len(self.feature))

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        features = _check_features(features, self.n_features)
        node = np.zeros(features.shape[0], dtype=np.int64)
        while True:
            split_feature = self.feature[node]
            active = np.flatnonzero(split_feature != LEAF)
            if active.size == 0:
                return node
            current = node[active]
            go_left = features[active, split_feature[active]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return self.value[self.apply(features)]

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(features), axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'n_features': self.n_features,
            'n_classes': self.n_classes,
            'feature': self.feature.tolist(),
            'threshold': [float(t) for t in self.threshold],
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'value': self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FittedTree':
        return cls(
            feature=np.asarray(data['feature'], dtype=np.int64),
            threshold=np.asarray(data['threshold'], dtype=float),
            left=np.asarray(data['left'], dtype=np.int64),
            right=np.asarray(data['right'], dtype=np.int64),
            value=np.asarray(data['value'], dtype=float).reshape(-1, int(data['n_classes'])),
            n_features=int(data['n_features']),
        )


def _check_features(features: np.ndarray, n_features: int) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != n_features:
        raise ShapeMismatch(f"expected a matrix with {n_features} feature column(s), got shape {features.shape}")
    return features


def _weighted_gini_mass(class_weights: np.ndarray) -> np.ndarray:
    """W * gini for each row of per-class weight sums."""
    totals = class_weights.sum(axis=-1)
    return totals - (class_weights ** 2).sum(axis=-1) / totals


def _best_split(
    features: np.ndarray,
    weighted_onehot: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator,
) -> Optional[Tuple[int, float]]:
    """
    Best (feature, threshold) by weighted Gini decrease, or None when no candidate exists.

    Candidates are midpoints between consecutive distinct sorted values. Zero-gain
    splits still count. Ties keep the lowest feature index, then the lowest threshold.
    """
    n_rows, n_features = features.shape
    n_candidates = params.n_candidate_features(n_features)
    if n_candidates < n_features:
        candidate_features = np.sort(rng.choice(n_features, size=n_candidates, replace=False))
    else:
        candidate_features = np.arange(n_features)

    node_weights = weighted_onehot.sum(axis=0)
    parent = _weighted_gini_mass(node_weights)
    positions = np.arange(n_rows - 1)
    leaf_ok = (positions + 1 >= params.min_samples_leaf) & (n_rows - positions - 1 >= params.min_samples_leaf)

    best: Optional[Tuple[int, float]] = None
    best_gain = -np.inf
    for f in candidate_features:
        order = np.argsort(features[:, f], kind='stable')
        values = features[order, f]
        valid = (values[:-1] < values[1:]) & leaf_ok
        if not valid.any():
            continue
        cumulative = np.cumsum(weighted_onehot[order], axis=0)[:-1][valid]
        gains = parent - _weighted_gini_mass(cumulative) - _weighted_gini_mass(node_weights - cumulative)
        j = int(np.argmax(gains))
        if gains[j] > best_gain:
            lower, upper = values[:-1][valid][j], values[1:][valid][j]
            threshold = (lower + upper) / 2.0
            if not threshold < upper:
                threshold = lower
            best_gain = gains[j]
            best = (int(f), float(threshold))
    return best


def fit_tree(
    dataset: Dataset,
    sample_weights: Optional[np.ndarray] = None,
    params: Optional[TreeParams] = None,
    seed: int = 0,
) -> FittedTree:
    """
    Grow a weighted CART tree.

    Args:
        dataset: training rows
        sample_weights: nonnegative weight per row (uniform when None); zero-weight
            rows are ignored entirely
        params: growth limits
        seed: seed for per-node feature subsets (max_features != "all")

    Returns:
        FittedTree whose leaves hold weighted class frequencies
    """
    params = params or TreeParams()
    n_classes = dataset.n_classes
    if sample_weights is None:
        weights = np.ones(dataset.n_samples)
    else:
        weights = np.asarray(sample_weights, dtype=float)
    if weights.shape != (dataset.n_samples,):
        raise ShapeMismatch(f"{weights.size} sample weights given for {dataset.n_samples} rows")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise DegenerateWeights("sample weights must be finite and nonnegative")
    if weights.sum() <= 0:
        raise DegenerateWeights("total sample weight must be positive")

    keep = weights > 0
    features = dataset.features[keep]
    labels = dataset.labels[keep]
    weighted_onehot = np.zeros((len(labels), n_classes))
    weighted_onehot[np.arange(len(labels)), labels] = weights[keep]
    rng = make_rng(seed)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[np.ndarray] = []

    def add_node(rows: np.ndarray) -> int:
        class_weights = weighted_onehot[rows].sum(axis=0)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(class_weights / class_weights.sum())
        return len(feature) - 1

    root_rows = np.arange(len(labels))
    stack = [(add_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if np.count_nonzero(value[node]) <= 1:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if len(rows) < 2 * params.min_samples_leaf:
            continue
        split = _best_split(features[rows], weighted_onehot[rows], params, rng)
        if split is None:
            continue

        split_feature, split_threshold = split
        go_left = features[rows, split_feature] <= split_threshold
        left_id = add_node(rows[go_left])
        right_id = add_node(rows[~go_left])
        feature[node] = split_feature
        threshold[node] = split_threshold
        left[node] = left_id
        right[node] = right_id
        stack.append((right_id, rows[~go_left], depth + 1))
        stack.append((left_id, rows[go_left], depth + 1))

    return FittedTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.vstack(value),
        n_features=dataset.n_features,
    )


def tree_predict_proba(tree: FittedTree, features: np.ndarray) -> np.ndarray:
    """Class-probability row of the leaf each input row lands in."""
    return tree.predict_proba(features)
