"""Shared ensemble contract: configuration, fitted model, prediction and training logs."""
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from ..errors import (
    AbsentTrueClass,
    IncompatibleFeatureWidth,
    InvalidConfig,
    InvalidDataset,
    ModelFormatError,
    ShapeMismatch,
)
from .data_tools import ClassDistribution, Dataset, class_distribution
from .metric_tools import METRICS, check_metric_names, confusion_matrix, score_all
from .sampling_tools import SamplingTargets, resolve_sampling_targets
from .schedule_tools import BalancingSchedule
from .tree_tools import FittedTree, TreeParams

logger = logging.getLogger(__name__)

DEFAULT_N_ESTIMATORS = 50


@dataclass(frozen=True)
class VerboseSpec:
    """
    Training-log granularity.

    granularity 0 turns logging off, k logs iterations 0, k, 2k, ... plus the last one.
    The print flags only shape the formatted line; records always keep everything.
    """

    granularity: int = 0
    print_distribution: bool = True
    print_metrics: bool = True

    def __post_init__(self):
        if self.granularity < 0:
            raise InvalidConfig(f"train_verbose granularity must be nonnegative, got {self.granularity}")

    @property
    def enabled(self) -> bool:
        return self.granularity > 0

    def should_log(self, iteration: int, total: int) -> bool:
        return self.enabled and (iteration % self.granularity == 0 or iteration == total - 1)

    @classmethod
    def from_value(cls, value: Union[bool, int, Mapping[str, Any], 'VerboseSpec', None]) -> 'VerboseSpec':
        """Accept False/None (off), True (every iteration), an int (every n) or a dict."""
        if isinstance(value, VerboseSpec):
            return value
        if value is None or value is False:
            return cls(0)
        if value is True:
            return cls(1)
        if isinstance(value, Mapping):
            unknown = set(value) - {'granularity', 'print_distribution', 'print_metrics'}
            if unknown:
                raise InvalidConfig(f"unknown train_verbose key(s): {sorted(unknown)}")
            return cls(granularity=int(value.get('granularity', 1)),
                       print_distribution=bool(value.get('print_distribution', True)),
                       print_metrics=bool(value.get('print_metrics', True)))
        return cls(int(value))


@dataclass(frozen=True)
class LogRecord:
    iteration: int
    metrics: Dict[str, Dict[str, float]]
    class_counts: Dict[int, int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iteration': self.iteration,
            'metrics': self.metrics,
            'class_counts': {str(c): n for c, n in self.class_counts.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LogRecord':
        return cls(iteration=int(data['iteration']),
                   metrics={d: {m: float(v) for m, v in values.items()} for d, values in data['metrics'].items()},
                   class_counts={int(c): int(n) for c, n in data['class_counts'].items()})


@dataclass
class TrainingLog:
    records: List[LogRecord] = field(default_factory=list)

    def append(self, record: LogRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise InvalidConfig(
                f"log iteration {record.iteration} does not follow {self.records[-1].iteration}")
        self.records.append(record)

    @property
    def iterations(self) -> List[int]:
        return [r.iteration for r in self.records]

    def record_for(self, iteration: int) -> LogRecord:
        for record in self.records:
            if record.iteration == iteration:
                return record
        raise KeyError(iteration)

    def to_dict(self) -> List[Dict[str, Any]]:
        return [r.to_dict() for r in self.records]

    @classmethod
    def from_dict(cls, data: Sequence[Dict[str, Any]]) -> 'TrainingLog':
        return cls([LogRecord.from_dict(r) for r in data])


@dataclass(frozen=True)
class TrainConfig:
    """
    Everything a fit_* trainer needs besides the data (and the cost matrix).

    tree_params None means the method's default base tree. target_label and
    n_target_samples switch the sampling targets to explicit mode.
    """

    n_estimators: int = DEFAULT_N_ESTIMATORS
    tree_params: Optional[TreeParams] = None
    balancing_schedule: Any = "uniform"
    target_label: Optional[int] = None
    n_target_samples: Optional[Union[int, Mapping[int, int]]] = None
    eval_datasets: Mapping[str, Dataset] = field(default_factory=dict)
    eval_metrics: Tuple[str, ...] = tuple(METRICS)
    train_verbose: Any = False
    seed: int = 0
    n_jobs: int = 1
    inner_rounds: int = 10
    k_neighbors: int = 5
    n_clusters: int = 2
    imbalance_ratio_threshold: float = 0.5
    k_bins: int = 5
    keep_weight_history: bool = False
    log_callback: Optional[Callable[[LogRecord], None]] = None

    def __post_init__(self):
        object.__setattr__(self, 'balancing_schedule', BalancingSchedule.from_value(self.balancing_schedule))
        object.__setattr__(self, 'train_verbose', VerboseSpec.from_value(self.train_verbose))
        object.__setattr__(self, 'eval_metrics', check_metric_names(self.eval_metrics))
        object.__setattr__(self, 'eval_datasets', dict(self.eval_datasets))
        if self.n_estimators < 1:
            raise InvalidConfig(f"n_estimators must be at least 1, got {self.n_estimators}")
        if self.inner_rounds < 1:
            raise InvalidConfig(f"inner_rounds must be at least 1, got {self.inner_rounds}")
        if self.n_jobs == 0:
            raise InvalidConfig("n_jobs must be nonzero")
        if self.k_neighbors < 1 or self.n_clusters < 1 or self.k_bins < 1:
            raise InvalidConfig("k_neighbors, n_clusters and k_bins must be at least 1")

    def with_changes(self, **changes) -> 'TrainConfig':
        return replace(self, **changes)

    def tree_params_or(self, default: TreeParams) -> TreeParams:
        return self.tree_params if self.tree_params is not None else default

    def explicit_targets(self) -> bool:
        return self.target_label is not None or self.n_target_samples is not None

    def final_targets(self, dist: ClassDistribution, default_mode: str) -> SamplingTargets:
        mode = "explicit" if self.explicit_targets() else default_mode
        return resolve_sampling_targets(dist, mode, self.target_label, self.n_target_samples)

    def echo(self, tree_params: TreeParams) -> Dict[str, Any]:
        """Serializable summary of the settings that shaped the model (worker count excluded)."""
        n_target_samples = self.n_target_samples
        if isinstance(n_target_samples, Mapping):
            n_target_samples = {str(c): int(n) for c, n in sorted(n_target_samples.items())}
        return {
            'n_estimators': self.n_estimators,
            'tree_params': tree_params.to_dict(),
            'balancing_schedule': self.balancing_schedule.describe(),
            'target_label': self.target_label,
            'n_target_samples': n_target_samples,
            'eval_datasets': sorted(self.eval_datasets),
            'eval_metrics': list(self.eval_metrics),
            'train_verbose': self.train_verbose.granularity,
            'seed': int(self.seed),
            'inner_rounds': self.inner_rounds,
            'k_neighbors': self.k_neighbors,
            'n_clusters': self.n_clusters,
            'imbalance_ratio_threshold': self.imbalance_ratio_threshold,
            'k_bins': self.k_bins,
        }


def normalize_rows(probabilities: np.ndarray) -> np.ndarray:
    return probabilities / probabilities.sum(axis=1, keepdims=True)


def combine(weighted_sum: np.ndarray, total_weight: float) -> np.ndarray:
    """Vote-weighted average of member probabilities, rows renormalized."""
    return normalize_rows(weighted_sum / total_weight)


@dataclass(frozen=True, eq=False)
class BoostedChain:
    """An inner SAMME chain acting as a single ensemble member."""

    trees: Tuple[FittedTree, ...]
    alphas: Tuple[float, ...]
    n_features: int

    kind = "chain"

    @property
    def n_classes(self) -> int:
        return self.trees[0].n_classes

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        weighted_sum = np.zeros((np.asarray(features).shape[0], self.n_classes))
        for tree, alpha in zip(self.trees, self.alphas):
            weighted_sum += alpha * tree.predict_proba(features)
        return combine(weighted_sum, float(sum(self.alphas)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'n_features': self.n_features,
            'alphas': [float(a) for a in self.alphas],
            'trees': [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BoostedChain':
        return cls(trees=tuple(FittedTree.from_dict(t) for t in data['trees']),
                   alphas=tuple(float(a) for a in data['alphas']),
                   n_features=int(data['n_features']))


ESTIMATOR_KINDS = {FittedTree.kind: FittedTree, BoostedChain.kind: BoostedChain}


@dataclass(frozen=True, eq=False)
class Member:
    estimator: Union[FittedTree, BoostedChain]
    vote_weight: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {'vote_weight': float(self.vote_weight), 'estimator': self.estimator.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Member':
        estimator = data['estimator']
        kind = estimator.get('kind')
        if kind not in ESTIMATOR_KINDS:
            raise ModelFormatError(f"unknown member kind '{kind}'")
        return cls(ESTIMATOR_KINDS[kind].from_dict(estimator), float(data['vote_weight']))


@dataclass(eq=False)
class EnsembleModel:
    """
    A fitted ensemble: ordered members with vote weights, the class list and the training log.

    `diagnostics` holds fit-time traces (boosting weight history, cascade pool sizes)
    that are not persisted.
    """

    method_id: str
    members: List[Member]
    n_classes: int
    n_features: int
    class_names: Optional[Tuple[str, ...]] = None
    training_log: TrainingLog = field(default_factory=TrainingLog)
    config: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.members:
            raise InvalidConfig(f"{self.method_id}: an ensemble needs at least one member")
        if not any(m.vote_weight > 0 for m in self.members):
            raise InvalidConfig(f"{self.method_id}: at least one vote weight must be positive")
        if any(m.estimator.n_classes != self.n_classes for m in self.members):
            raise InvalidConfig(f"{self.method_id}: members disagree on the number of classes")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def vote_weights(self) -> List[float]:
        return [m.vote_weight for m in self.members]

    def predict_proba(self, features: np.ndarray, n_members: Optional[int] = None) -> np.ndarray:
        return ensemble_predict_proba(self, features, n_members)

    def predict(self, features: np.ndarray, n_members: Optional[int] = None) -> np.ndarray:
        return ensemble_predict(self, features, n_members)

    def class_label(self, class_id: int) -> str:
        return self.class_names[class_id] if self.class_names is not None else str(class_id)


def _check_width(features: np.ndarray, n_features: int) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != n_features:
        raise ShapeMismatch(f"expected a matrix with {n_features} feature column(s), got shape {features.shape}")
    return features


def ensemble_predict_proba(model: EnsembleModel, features: np.ndarray,
                           n_members: Optional[int] = None) -> np.ndarray:
    """
    Vote-weighted average of member probabilities over the first `n_members` members.

    Returns:
        (n_samples, n_classes) matrix whose rows sum to 1
    """
    features = _check_width(features, model.n_features)
    members = model.members if n_members is None else model.members[:n_members]
    if not members:
        raise InvalidConfig("a prefix ensemble needs at least one member")
    weighted_sum = np.zeros((features.shape[0], model.n_classes))
    total_weight = 0.0
    for member in members:
        weighted_sum += member.vote_weight * member.estimator.predict_proba(features)
        total_weight += member.vote_weight
    return combine(weighted_sum, total_weight)


def ensemble_predict(model: EnsembleModel, features: np.ndarray,
                     n_members: Optional[int] = None) -> np.ndarray:
    """Most probable class per row; ties go to the lowest class id."""
    return np.argmax(ensemble_predict_proba(model, features, n_members), axis=1)


def describe_model(model: EnsembleModel) -> Dict[str, Any]:
    return {
        'method_id': model.method_id,
        'n_members': model.n_members,
        'vote_weights': [round(w, 6) for w in model.vote_weights],
        'classes': [model.class_label(c) for c in range(model.n_classes)],
        'n_features': model.n_features,
    }


def check_training_set(dataset: Dataset) -> ClassDistribution:
    """Training data needs at least two populated classes."""
    dist = class_distribution(dataset.labels)
    if dataset.n_classes < 2 or len(dist.classes) < 2:
        raise InvalidDataset(f"training needs at least 2 classes, found {len(dist.classes)}")
    return dist


class EvalTracker:
    """Running vote-weighted probability sums of the partial ensemble on each evaluation dataset."""

    def __init__(self, datasets: Mapping[str, Dataset], metrics: Sequence[str], n_classes: int):
        self.datasets = dict(datasets)
        self.metrics = tuple(metrics)
        self.n_classes = n_classes
        self.sums = {name: np.zeros((ds.n_samples, n_classes)) for name, ds in self.datasets.items()}
        self.total_weight = 0.0

    def add(self, member: Member) -> None:
        for name, ds in self.datasets.items():
            self.sums[name] += member.vote_weight * member.estimator.predict_proba(ds.features)
        self.total_weight += member.vote_weight

    def evaluate(self) -> Dict[str, Dict[str, float]]:
        results = {}
        for name, ds in self.datasets.items():
            predictions = np.argmax(combine(self.sums[name], self.total_weight), axis=1)
            cm = confusion_matrix(ds.labels, predictions, self.n_classes)
            results[name] = score_all(cm, self.metrics)
        return results


def format_record(record: LogRecord, spec: VerboseSpec) -> str:
    parts = [f"iteration {record.iteration:>4}"]
    if spec.print_distribution:
        parts.append("counts " + ", ".join(f"{c}:{n}" for c, n in sorted(record.class_counts.items())))
    if spec.print_metrics:
        for name, values in record.metrics.items():
            parts.append(f"{name} " + " ".join(f"{m}={v:.3f}" for m, v in values.items()))
    return " | ".join(parts)


class TrainingMonitor:
    """Feeds appended members to the evaluation tracker and writes TrainingLog records."""

    def __init__(self, training_set: Dataset, config: TrainConfig, method_id: str):
        self.config = config
        self.method_id = method_id
        self.verbose = config.train_verbose
        self.log = TrainingLog()
        self.tracker: Optional[EvalTracker] = None
        self.last_iteration = -1
        self.last_counts: Dict[int, int] = {}
        if self.verbose.enabled:
            self.tracker = EvalTracker(self._evaluation_sets(training_set), config.eval_metrics,
                                       training_set.n_classes)

    def _evaluation_sets(self, training_set: Dataset) -> Dict[str, Dataset]:
        datasets: Dict[str, Dataset] = {}
        if np.all(np.bincount(training_set.labels, minlength=training_set.n_classes) > 0):
            datasets['train'] = training_set
        else:
            logger.warning(f"{self.method_id}: training set lacks a class; not evaluating it during training")
        for name, ds in self.config.eval_datasets.items():
            if ds.n_features != training_set.n_features:
                raise IncompatibleFeatureWidth(
                    f"eval dataset '{name}' has {ds.n_features} features, training data has {training_set.n_features}")
            if ds.labels.size and ds.labels.max() >= training_set.n_classes:
                raise InvalidDataset(f"eval dataset '{name}' has labels outside [0, {training_set.n_classes})")
            support = np.bincount(ds.labels, minlength=training_set.n_classes)
            absent = np.flatnonzero(support == 0)
            if absent.size:
                raise AbsentTrueClass(f"eval dataset '{name}' has no samples of class {int(absent[0])}")
            datasets[name] = ds
        return datasets

    def record(self, member: Member, iteration: int, class_counts: Mapping[int, int], total: int) -> None:
        if self.tracker is None:
            return
        self.tracker.add(member)
        self.last_iteration = iteration
        self.last_counts = dict(class_counts)
        if self.verbose.should_log(iteration, total):
            emit_training_log(self, iteration, self.last_counts)

    def finish(self) -> TrainingLog:
        """Make sure the last appended member is logged (early stops included)."""
        if self.tracker is not None and self.last_iteration >= 0:
            if not self.log.records or self.log.records[-1].iteration < self.last_iteration:
                emit_training_log(self, self.last_iteration, self.last_counts)
        return self.log


def emit_training_log(monitor: TrainingMonitor, iteration: int, class_counts: Mapping[int, int]) -> LogRecord:
    """Evaluate the partial ensemble (members up to `iteration`) and append a log record."""
    record = LogRecord(iteration=iteration, metrics=monitor.tracker.evaluate(),
                       class_counts={int(c): int(n) for c, n in sorted(class_counts.items())})
    monitor.log.append(record)
    logger.info(f"{monitor.method_id} {format_record(record, monitor.verbose)}")
    if monitor.config.log_callback is not None:
        monitor.config.log_callback(record)
    return record


def build_model(method_id: str, members: List[Member], dataset: Dataset, config: TrainConfig,
                tree_params: TreeParams, monitor: TrainingMonitor,
                diagnostics: Optional[Dict[str, Any]] = None) -> EnsembleModel:
    model = EnsembleModel(
        method_id=method_id,
        members=members,
        n_classes=dataset.n_classes,
        n_features=dataset.n_features,
        class_names=dataset.class_names,
        training_log=monitor.finish(),
        config=config.echo(tree_params),
        diagnostics=diagnostics or {},
    )
    logger.info(f"{method_id}: fitted {model.n_members} member(s)")
    return model
