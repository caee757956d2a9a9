"""SAMME boosting backbone with resampling and cost-sensitive reweighting variants."""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from ..errors import (
    AllRoundsRejected,
    ImbalanceToolkitError,
    InvalidConfig,
    InvalidCostMatrix,
    with_context,
)
from .data_tools import ClassDistribution, Dataset, class_distribution
from .ensemble_tools import (
    BoostedChain,
    EnsembleModel,
    Member,
    TrainConfig,
    TrainingMonitor,
    build_model,
    check_training_set,
)
from .sampling_tools import (
    ResampleTrace,
    SamplingTargets,
    kmeans_smote_sample,
    random_over_sample,
    random_under_sample,
    smote_sample,
)
from .schedule_tools import schedule_targets
from .shared_tools import derive_seed
from .tree_tools import FittedTree, TreeParams, fit_tree

logger = logging.getLogger(__name__)

BOOSTING_TREE_PARAMS = TreeParams(max_depth=1)

# alpha for a perfect round is capped at ln(ALPHA_CAP) + ln(K - 1)
ALPHA_CAP = 1e9

RESAMPLE_BOOST_VARIANTS = ("rusboost", "overboost", "smoteboost", "kmeans_smoteboost")
REWEIGHT_BOOST_VARIANTS = ("adacost", "adauboost", "asymboost")
COST_STRATEGIES = ("balanced", "uniform", "inverse", "log1p-inverse")
DEFAULT_COST_STRATEGY = "balanced"

# Round callbacks: draw(round, weights, seed) -> (sample, sample weights, class counts)
# and reweight(weights, misclassified, predictions, alpha) -> new unnormalized weights
RoundDraw = Callable[[int, np.ndarray, int], Tuple[Dataset, np.ndarray, Dict[int, int]]]
Reweight = Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """costs[i][j] is the cost of predicting class j when the truth is class i."""

    costs: np.ndarray

    def __post_init__(self):
        costs = np.array(self.costs, dtype=float)
        if costs.ndim != 2 or costs.shape[0] != costs.shape[1] or costs.shape[0] < 2:
            raise InvalidCostMatrix(f"cost matrix must be square K x K with K >= 2, got shape {costs.shape}")
        if not np.all(np.isfinite(costs)):
            raise InvalidCostMatrix("cost matrix entries must be finite")
        if np.any(costs < 0):
            raise InvalidCostMatrix("cost matrix entries must be nonnegative")
        if np.any(np.diag(costs) != 0):
            raise InvalidCostMatrix("cost matrix diagonal must be 0")
        if not np.any(costs > 0):
            raise InvalidCostMatrix("cost matrix needs at least one positive off-diagonal entry")
        costs.setflags(write=False)
        object.__setattr__(self, 'costs', costs)

    @property
    def n_classes(self) -> int:
        return int(self.costs.shape[0])

    @property
    def max_cost(self) -> float:
        return float(self.costs.max())

    def row_costs(self) -> np.ndarray:
        """Largest misclassification cost of each true class."""
        return self.costs.max(axis=1)

    def is_uniform(self) -> bool:
        off_diagonal = self.costs[~np.eye(self.n_classes, dtype=bool)]
        return bool(np.all(off_diagonal == off_diagonal[0]))

    def tolist(self) -> List[List[float]]:
        return self.costs.tolist()

    @classmethod
    def uniform(cls, n_classes: int, value: float = 1.0) -> 'CostMatrix':
        return cls(value * (1.0 - np.eye(n_classes)))


def resolve_cost_matrix(
    dist: ClassDistribution,
    spec: Union[str, CostMatrix, Sequence[Sequence[float]], None],
    n_classes: Optional[int] = None,
) -> CostMatrix:
    """
    Build a cost matrix from a strategy name or an explicit matrix.

    Strategies:
        balanced (default): cost[i][j] = n_max / n_i, so cost-proportional weights
            give every class the same total mass
        uniform: every off-diagonal cost is 1
        inverse: cost[i][j] = n_j / n_i, so errors on rare classes cost more
        log1p-inverse: cost[i][j] = log1p(n_j / n_i)

    Returns:
        a validated K x K CostMatrix
    """
    n_classes = n_classes or (max(dist.classes) + 1)
    if spec is None:
        spec = DEFAULT_COST_STRATEGY
    if isinstance(spec, CostMatrix):
        matrix = spec
    elif isinstance(spec, str):
        if spec not in COST_STRATEGIES:
            raise InvalidCostMatrix(f"unknown cost strategy '{spec}', expected one of {COST_STRATEGIES}")
        if spec == "uniform":
            matrix = CostMatrix.uniform(n_classes)
        else:
            counts = np.array([dist.counts.get(c, 0) for c in range(n_classes)], dtype=float)
            if np.any(counts == 0):
                raise InvalidCostMatrix(f"strategy '{spec}' needs samples of every class")
            if spec == "balanced":
                costs = np.repeat((counts.max() / counts)[:, None], n_classes, axis=1)
            else:
                ratios = counts[None, :] / counts[:, None]
                costs = ratios if spec == "inverse" else np.log1p(ratios)
            np.fill_diagonal(costs, 0.0)
            matrix = CostMatrix(costs)
    else:
        matrix = CostMatrix(np.asarray(spec, dtype=float))
    if matrix.n_classes != n_classes:
        raise InvalidCostMatrix(f"cost matrix is {matrix.n_classes} x {matrix.n_classes}, data has {n_classes} classes")
    return matrix


def samme_alpha(error: float, n_classes: int) -> float:
    """ln((1 - err) / err) + ln(K - 1), capped for err = 0."""
    if error <= 0:
        return math.log(ALPHA_CAP) + math.log(n_classes - 1)
    return math.log((1.0 - error) / error) + math.log(n_classes - 1)


def _plain_reweight(weights, misclassified, predictions, alpha):
    return weights * np.exp(alpha * misclassified)


@dataclass
class BoostResult:
    members: List[Member]
    weight_history: List[np.ndarray]


def run_samme(
    dataset: Dataset,
    n_rounds: int,
    seed: int,
    tree_params: TreeParams,
    initial_weights: np.ndarray,
    draw: RoundDraw,
    reweight: Reweight = _plain_reweight,
    monitor: Optional[TrainingMonitor] = None,
    keep_history: bool = False,
) -> BoostResult:
    """
    Discrete multi-class boosting loop shared by every boosting trainer.

    Each round draws a training sample (possibly resampled) from the current weights,
    fits a tree on it and measures the weighted error on the original rows. A round
    with error >= 1 - 1/K is discarded, the weights reset to `initial_weights` and the
    round retried once; a second consecutive rejection ends training. A perfect
    round gets the capped alpha and ends training.
    """
    n_classes = dataset.n_classes
    chance = 1.0 - 1.0 / n_classes
    weights = initial_weights / initial_weights.sum()
    members: List[Member] = []
    history: List[np.ndarray] = []

    for t in range(n_rounds):
        accepted = None
        for attempt in range(2):
            round_seed = derive_seed(seed, "round" if attempt == 0 else "round-retry", t)
            try:
                sample, sample_weights, counts = draw(t, weights, round_seed)
                tree = fit_tree(sample, sample_weights, tree_params, seed=derive_seed(round_seed, "tree"))
            except ImbalanceToolkitError as e:
                logger.error(f"Boosting round {t} failed: {e}")
                raise with_context(e, f"round {t}")
            predictions = tree.predict(dataset.features)
            misclassified = predictions != dataset.labels
            error = float(np.clip(weights[misclassified].sum() / weights.sum(), 0.0, 1.0))
            if error >= chance:
                logger.warning(f"Round {t}: weighted error {error:.4f} >= {chance:.4f}, discarding the member")
                weights = initial_weights / initial_weights.sum()
                continue
            accepted = (tree, predictions, misclassified, error, counts)
            break

        if accepted is None:
            logger.warning(f"Two consecutive rejected rounds at round {t}, stopping early")
            break

        tree, predictions, misclassified, error, counts = accepted
        alpha = samme_alpha(error, n_classes)
        member = Member(tree, alpha)
        members.append(member)
        if keep_history:
            history.append(weights.copy())
        if monitor is not None:
            monitor.record(member, t, counts, n_rounds)
        logger.debug(f"Round {t}: error={error:.4f} alpha={alpha:.4f}")

        if error <= 0:
            logger.info(f"Round {t} classified every row correctly, stopping early")
            break
        weights = reweight(weights, misclassified.astype(float), predictions, alpha)
        weights = weights / weights.sum()

    if not members:
        raise AllRoundsRejected(f"every boosting round reached weighted error >= {chance:.4f}")
    return BoostResult(members, history)


def _uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _resampler(variant: str, config: TrainConfig):
    if variant == "rusboost":
        return lambda ds, targets, seed: random_under_sample(ds, targets, seed=seed)
    if variant == "overboost":
        return lambda ds, targets, seed: random_over_sample(ds, targets, seed=seed)
    if variant == "smoteboost":
        return lambda ds, targets, seed: smote_sample(ds, targets, k_neighbors=config.k_neighbors, seed=seed)
    return lambda ds, targets, seed: kmeans_smote_sample(
        ds, targets, n_clusters=config.n_clusters, k_neighbors=config.k_neighbors,
        imbalance_ratio_threshold=config.imbalance_ratio_threshold, seed=seed)


def inherited_weights(dataset: Dataset, trace: ResampleTrace, sample: Dataset, weights: np.ndarray) -> np.ndarray:
    """Kept rows carry their source weight, synthetic rows the mean weight of their class."""
    kept = weights[trace.kept_indices]
    if not trace.synthetic_count:
        return kept
    synthetic_labels = sample.labels[len(trace.kept_indices):]
    class_mean = np.zeros(dataset.n_classes)
    for class_id in np.unique(synthetic_labels):
        class_mean[class_id] = weights[dataset.labels == class_id].mean()
    return np.concatenate([kept, class_mean[synthetic_labels]])


def fit_resample_boost(variant: str, dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """
    Boosting where every round trains on a resampled copy of the weighted data.

    Args:
        variant: rusboost, overboost, smoteboost or kmeans_smoteboost
        dataset: training data with K >= 2 classes
        config: training configuration

    Returns:
        EnsembleModel with SAMME vote weights
    """
    if variant not in RESAMPLE_BOOST_VARIANTS:
        raise InvalidConfig(f"unknown resample-boost variant '{variant}', expected one of {RESAMPLE_BOOST_VARIANTS}")
    origin = check_training_set(dataset)
    default_mode = "under_to_minority" if variant == "rusboost" else "over_to_majority"
    final = config.final_targets(origin, default_mode)
    tree_params = config.tree_params_or(BOOSTING_TREE_PARAMS)
    resample = _resampler(variant, config)
    n_rounds = config.n_estimators
    logger.info(f"Fitting {variant} with {n_rounds} rounds on {dataset.n_samples} rows {origin.as_dict()}")

    def draw(t: int, weights: np.ndarray, seed: int):
        targets: SamplingTargets = schedule_targets(config.balancing_schedule, origin, final, t, n_rounds)
        sample, trace = resample(dataset, targets, seed)
        sample_weights = inherited_weights(dataset, trace, sample, weights)
        return sample, sample_weights, class_distribution(sample.labels).as_dict()

    monitor = TrainingMonitor(dataset, config, variant)
    result = run_samme(dataset, n_rounds, config.seed, tree_params, _uniform_weights(dataset.n_samples),
                       draw, monitor=monitor, keep_history=config.keep_weight_history)
    return build_model(variant, result.members, dataset, config, tree_params, monitor,
                       diagnostics={'weight_history': result.weight_history})


def _asymmetry_ratios(costs: CostMatrix) -> np.ndarray:
    """k_c = (largest cost of misclassifying c) / (largest cost of predicting c wrongly)."""
    matrix = costs.costs.copy()
    off_diagonal = matrix[~np.eye(costs.n_classes, dtype=bool)]
    smallest = off_diagonal[off_diagonal > 0].min()
    np.fill_diagonal(matrix, 0.0)
    numerators = matrix.max(axis=1)
    denominators = matrix.max(axis=0)
    numerators = np.where(numerators > 0, numerators, smallest)
    denominators = np.where(denominators > 0, denominators, smallest)
    return numerators / denominators


def _cost_reweight(variant: str, costs: CostMatrix, labels: np.ndarray, n_rounds: int) -> Reweight:
    max_cost = costs.max_cost
    row_max = costs.row_costs()[labels]
    row_cost = row_max / max_cost

    if variant == "adacost":
        # with row-constant costs log(miss) + log(correct) = alpha on every row, so no class drifts
        def reweight(weights, misclassified, predictions, alpha):
            missed = misclassified > 0
            c = np.where(missed, costs.costs[labels, predictions] / max_cost, row_cost)
            beta = np.where(missed, 0.5 * c + 0.5, -0.5 * c + 0.5)
            return weights * np.exp(alpha * beta)
        return reweight

    if variant == "adauboost":
        # cost relative to the row's own maximum; the uneven start carries the class costs
        safe_max = np.where(row_max > 0, row_max, 1.0)

        def reweight(weights, misclassified, predictions, alpha):
            missed = misclassified > 0
            relative = np.where(row_max > 0, costs.costs[labels, predictions] / safe_max, 1.0)
            return weights * np.where(missed, np.exp(alpha * relative), 1.0)
        return reweight

    asymmetry = np.exp(np.log(np.sqrt(_asymmetry_ratios(costs))) / n_rounds)[labels]

    def reweight(weights, misclassified, predictions, alpha):
        return weights * np.exp(alpha * misclassified) * asymmetry
    return reweight


def fit_reweight_boost(
    variant: str,
    dataset: Dataset,
    cost_matrix: Union[CostMatrix, str, Sequence[Sequence[float]], None],
    config: TrainConfig,
) -> EnsembleModel:
    """
    Cost-sensitive boosting on the full training set (no resampling).

    AdaCost and AdaUBoost start from weights proportional to each row's largest
    misclassification cost; AsymBoost starts uniform and adds a per-round
    asymmetry factor. With a uniform cost matrix every variant follows plain SAMME.
    """
    if variant not in REWEIGHT_BOOST_VARIANTS:
        raise InvalidConfig(f"unknown reweight-boost variant '{variant}', expected one of {REWEIGHT_BOOST_VARIANTS}")
    origin = check_training_set(dataset)
    costs = resolve_cost_matrix(origin, cost_matrix, dataset.n_classes)
    tree_params = config.tree_params_or(BOOSTING_TREE_PARAMS)
    n_rounds = config.n_estimators
    logger.info(f"Fitting {variant} with {n_rounds} rounds, costs {costs.tolist()}")

    if variant == "asymboost":
        initial = _uniform_weights(dataset.n_samples)
    else:
        row_cost = costs.row_costs()[dataset.labels]
        initial = row_cost / row_cost.sum()
    counts = origin.as_dict()

    def draw(t: int, weights: np.ndarray, seed: int):
        return dataset, weights, counts

    monitor = TrainingMonitor(dataset, config, variant)
    result = run_samme(dataset, n_rounds, config.seed, tree_params, initial, draw,
                       reweight=_cost_reweight(variant, costs, dataset.labels, n_rounds),
                       monitor=monitor, keep_history=config.keep_weight_history)
    model = build_model(variant, result.members, dataset, config, tree_params, monitor,
                        diagnostics={'weight_history': result.weight_history})
    model.config['cost_matrix'] = costs.tolist()
    return model


def fit_samme(dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """Plain SAMME on the original data, the cost-neutral reference for the reweighting variants."""
    origin = check_training_set(dataset)
    tree_params = config.tree_params_or(BOOSTING_TREE_PARAMS)
    counts = origin.as_dict()

    def draw(t: int, weights: np.ndarray, seed: int):
        return dataset, weights, counts

    monitor = TrainingMonitor(dataset, config, "ada-boost")
    result = run_samme(dataset, config.n_estimators, config.seed, tree_params,
                       _uniform_weights(dataset.n_samples), draw, monitor=monitor,
                       keep_history=config.keep_weight_history)
    return build_model("ada-boost", result.members, dataset, config, tree_params, monitor,
                       diagnostics={'weight_history': result.weight_history})


def fit_boosted_chain(dataset: Dataset, n_rounds: int, tree_params: TreeParams, seed: int) -> BoostedChain:
    """A small SAMME chain on `dataset`, used as one EasyEnsemble member."""

    def draw(t: int, weights: np.ndarray, round_seed: int):
        return dataset, weights, {}

    result = run_samme(dataset, n_rounds, seed, tree_params, _uniform_weights(dataset.n_samples), draw)
    trees: Tuple[FittedTree, ...] = tuple(m.estimator for m in result.members)
    return BoostedChain(trees=trees, alphas=tuple(m.vote_weight for m in result.members),
                        n_features=dataset.n_features)
