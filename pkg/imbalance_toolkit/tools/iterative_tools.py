"""Iterative under-sampling ensembles whose rounds depend on the ensemble built so far."""
from typing import Dict, List
import logging
import math

import numpy as np

from ..errors import ImbalanceToolkitError, TooFewMajority, with_context
from .data_tools import Dataset, class_distribution
from .ensemble_tools import (
    EnsembleModel,
    Member,
    TrainConfig,
    TrainingMonitor,
    build_model,
    check_training_set,
    combine,
)
from .sampling_tools import SamplingTargets, random_under_sample, self_paced_under_sample
from .schedule_tools import schedule_targets
from .shared_tools import derive_seed, round_half_up
from .tree_tools import TreeParams, fit_tree

logger = logging.getLogger(__name__)

# Full-depth base trees for the iterative methods and the single-tree baseline
ITERATIVE_TREE_PARAMS = TreeParams(max_depth=10)


def self_paced_alpha(iteration: int, n_estimators: int) -> float:
    """tan(i * pi / (2T)): 0 at the first round, growing toward the last."""
    return math.tan(iteration * math.pi / (2 * n_estimators))


def hardness_from_proba(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """|P(true class) - 1| per row."""
    true_class = probabilities[np.arange(len(labels)), labels]
    return np.clip(np.abs(true_class - 1.0), 0.0, 1.0)


def fit_self_paced_ensemble(dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """
    Self-paced under-sampling ensemble.

    Member 0 trains on a plain random under-sample. Every later round measures each
    row's hardness under the current ensemble and under-samples with hardness-harmonized
    bins, the self-paced factor growing as tan(i * pi / (2T)). Members vote equally.
    """
    origin = check_training_set(dataset)
    final = config.final_targets(origin, "under_to_minority")
    tree_params = config.tree_params_or(ITERATIVE_TREE_PARAMS)
    n_rounds = config.n_estimators
    logger.info(f"Fitting self-paced ensemble with {n_rounds} members on {dataset.n_samples} rows {origin.as_dict()}")

    monitor = TrainingMonitor(dataset, config, "self-paced-ensemble")
    members: List[Member] = []
    proba_sum = np.zeros((dataset.n_samples, dataset.n_classes))
    for i in range(n_rounds):
        seed = derive_seed(config.seed, "round", i)
        try:
            targets = schedule_targets(config.balancing_schedule, origin, final, i, n_rounds)
            if i == 0:
                sample, _ = random_under_sample(dataset, targets, seed=seed)
            else:
                hardness = hardness_from_proba(combine(proba_sum, float(i)), dataset.labels)
                alpha = self_paced_alpha(i, n_rounds)
                sample, _ = self_paced_under_sample(dataset, targets, hardness, k_bins=config.k_bins,
                                                    alpha=alpha, seed=seed)
            tree = fit_tree(sample, None, tree_params, seed=derive_seed(seed, "tree"))
        except ImbalanceToolkitError as e:
            logger.error(f"Self-paced round {i} failed: {e}")
            raise with_context(e, f"round {i}")

        member = Member(tree, 1.0)
        members.append(member)
        proba_sum += tree.predict_proba(dataset.features)
        monitor.record(member, i, class_distribution(sample.labels).as_dict(), n_rounds)

    return build_model("self-paced-ensemble", members, dataset, config, tree_params, monitor)


def cascade_keep_factor(n_majority: int, n_minority: int, n_estimators: int) -> float:
    """Per-round pool keep factor (n_min / n_maj) ** (1 / (T - 1))."""
    if n_estimators <= 1:
        return 1.0
    return (n_minority / n_majority) ** (1.0 / (n_estimators - 1))


def cascade_pool_size(n_majority: int, n_minority: int, rounds_done: int, n_estimators: int) -> int:
    """Planned pool size after `rounds_done` shrink steps."""
    if n_estimators <= 1:
        return n_majority
    shrink = (n_minority / n_majority) ** (rounds_done / (n_estimators - 1))
    return round_half_up(n_majority * shrink)


def fit_balance_cascade(dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """
    BalanceCascade: under-sample a shrinking pool of each majority class.

    After each round the rows of every majority pool that the current ensemble
    classifies correctly with the highest true-class confidence leave the pool, so
    the pool follows n_maj * f ** r with f = (n_min / n_maj) ** (1 / (T - 1)).
    Classes at the minority count are never shrunk.

    The diagnostics `pool_sizes` (per round, per majority class) and `removed_rows`
    record the pool history.
    """
    origin = check_training_set(dataset)
    n_minority = origin.minority_count
    majority = [c for c in origin.classes if origin[c] > n_minority]
    if not majority:
        raise TooFewMajority(f"every class has {n_minority} samples; nothing to cascade")
    final = config.final_targets(origin, "under_to_minority")
    tree_params = config.tree_params_or(ITERATIVE_TREE_PARAMS)
    n_rounds = config.n_estimators
    logger.info(f"Fitting balance cascade with {n_rounds} members, majority classes {majority}")

    pools: Dict[int, np.ndarray] = {c: np.flatnonzero(dataset.labels == c) for c in origin.classes}
    pool_sizes: List[Dict[int, int]] = []
    removed_rows: List[np.ndarray] = []
    monitor = TrainingMonitor(dataset, config, "balance-cascade")
    members: List[Member] = []
    proba_sum = np.zeros((dataset.n_samples, dataset.n_classes))

    for i in range(n_rounds):
        seed = derive_seed(config.seed, "round", i)
        pool_sizes.append({c: len(pools[c]) for c in majority})
        pool_rows = np.sort(np.concatenate([pools[c] for c in origin.classes]))
        pool = dataset.subset(pool_rows)
        try:
            planned = schedule_targets(config.balancing_schedule, origin, final, i, n_rounds)
            targets = SamplingTargets({c: min(planned[c], len(pools[c])) for c in origin.classes})
            if targets.as_dict() != planned.as_dict():
                logger.debug(f"Round {i}: targets {planned.as_dict()} clipped to the pool, {targets.as_dict()}")
            sample, _ = random_under_sample(pool, targets, seed=seed)
            tree = fit_tree(sample, None, tree_params, seed=derive_seed(seed, "tree"))
        except ImbalanceToolkitError as e:
            logger.error(f"Cascade round {i} failed: {e}")
            raise with_context(e, f"round {i}")

        member = Member(tree, 1.0)
        members.append(member)
        proba_sum += tree.predict_proba(dataset.features)
        monitor.record(member, i, class_distribution(sample.labels).as_dict(), n_rounds)
        if i == n_rounds - 1:
            break

        proba = combine(proba_sum, float(len(members)))
        predictions = np.argmax(proba, axis=1)
        stop = False
        removed = []
        for c in majority:
            next_size = cascade_pool_size(origin[c], n_minority, i + 1, n_rounds)
            if next_size < n_minority:
                stop = True
                break
            rows = pools[c]
            correct = rows[predictions[rows] == c]
            # Most confident first; the stable sort keeps row order on ties
            order = np.argsort(-proba[correct, c], kind='stable')
            n_remove = min(max(len(rows) - next_size, 0), len(correct))
            drop = correct[order[:n_remove]]
            pools[c] = np.setdiff1d(rows, drop, assume_unique=True)
            removed.append(drop)
        if stop:
            logger.info(f"Round {i}: the pool would fall below the minority count, stopping early")
            break
        removed_rows.append(np.sort(np.concatenate(removed)) if removed else np.zeros(0, dtype=np.int64))
        logger.debug(f"Round {i}: pool sizes {[len(pools[c]) for c in majority]}")

    return build_model("balance-cascade", members, dataset, config, tree_params, monitor,
                       diagnostics={'pool_sizes': pool_sizes, 'removed_rows': removed_rows})


def fit_single_tree(dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """One unweighted tree on the raw training data (the baseline every method is compared against)."""
    check_training_set(dataset)
    tree_params = config.tree_params_or(ITERATIVE_TREE_PARAMS)
    monitor = TrainingMonitor(dataset, config, "decision-tree")
    tree = fit_tree(dataset, None, tree_params, seed=derive_seed(config.seed, "tree"))
    member = Member(tree, 1.0)
    monitor.record(member, 0, class_distribution(dataset.labels).as_dict(), 1)
    return build_model("decision-tree", [member], dataset, config, tree_params, monitor)
