"""Parallel ensemble family: every member trains on its own independently resampled copy."""
from typing import Dict, List, Tuple, Union
import logging

from joblib import Parallel, delayed
import numpy as np

from ..errors import ImbalanceToolkitError, InvalidConfig, with_context
from .boosting_tools import BOOSTING_TREE_PARAMS, fit_boosted_chain
from .data_tools import Dataset, class_distribution
from .ensemble_tools import (
    BoostedChain,
    EnsembleModel,
    Member,
    TrainConfig,
    TrainingMonitor,
    build_model,
    check_training_set,
)
from .sampling_tools import SamplingTargets, random_over_sample, random_under_sample, smote_sample
from .shared_tools import derive_seed, make_rng
from .tree_tools import FittedTree, TreeParams, fit_tree

logger = logging.getLogger(__name__)

BAGGING_VARIANTS = ("underbagging", "overbagging", "smotebagging", "balanced_random_forest", "easyensemble")

OVER_SAMPLING_VARIANTS = ("overbagging", "smotebagging")


def bagging_tree_params(variant: str) -> TreeParams:
    """Base tree of a bagging variant when the config does not set one."""
    if variant == "balanced_random_forest":
        return TreeParams(max_features="sqrt")
    if variant == "easyensemble":
        return BOOSTING_TREE_PARAMS
    return TreeParams()


def stratified_bootstrap(dataset: Dataset, seed: int) -> Dataset:
    """Draw each class's rows with replacement, keeping every class count unchanged."""
    rng = make_rng(seed)
    picks = [rng.choice(np.flatnonzero(dataset.labels == class_id), size=int(count), replace=True)
             for class_id, count in class_distribution(dataset.labels).counts.items()]
    return dataset.subset(np.sort(np.concatenate(picks)))


def _fit_member(
    variant: str,
    dataset: Dataset,
    targets: SamplingTargets,
    tree_params: TreeParams,
    inner_rounds: int,
    k_neighbors: int,
    master_seed: int,
    index: int,
) -> Tuple[Union[FittedTree, BoostedChain], Dict[int, int]]:
    """Resample, then fit one member; everything random flows from derive(master, "member", index)."""
    seed = derive_seed(master_seed, "member", index)
    try:
        if variant in OVER_SAMPLING_VARIANTS:
            # oversampling keeps every original row, so the bag itself is a bootstrap
            bag = stratified_bootstrap(dataset, derive_seed(seed, "bootstrap"))
            if variant == "smotebagging":
                sample, _ = smote_sample(bag, targets, k_neighbors=k_neighbors, seed=derive_seed(seed, "sample"))
            else:
                sample, _ = random_over_sample(bag, targets, seed=derive_seed(seed, "sample"))
        else:
            sample, _ = random_under_sample(dataset, targets, seed=derive_seed(seed, "sample"))

        if variant == "easyensemble":
            estimator = fit_boosted_chain(sample, inner_rounds, tree_params, derive_seed(seed, "chain"))
        else:
            estimator = fit_tree(sample, None, tree_params, seed=derive_seed(seed, "tree"))
    except ImbalanceToolkitError as e:
        raise with_context(e, f"member {index}")
    return estimator, class_distribution(sample.labels).as_dict()


def fit_bagging_ensemble(variant: str, dataset: Dataset, config: TrainConfig) -> EnsembleModel:
    """
    Fit T independent members, each on its own resampled copy, and average their votes.

    Members are fitted sequentially when config.n_jobs == 1 and with joblib otherwise;
    both paths produce identical models because member m only depends on its
    derived seed.

    Args:
        variant: underbagging, overbagging, smotebagging, balanced_random_forest or easyensemble
        dataset: training data with K >= 2 classes
        config: training configuration

    Returns:
        EnsembleModel whose members all carry vote weight 1
    """
    if variant not in BAGGING_VARIANTS:
        raise InvalidConfig(f"unknown bagging variant '{variant}', expected one of {BAGGING_VARIANTS}")
    origin = check_training_set(dataset)
    default_mode = "over_to_majority" if variant in OVER_SAMPLING_VARIANTS else "under_to_minority"
    targets = config.final_targets(origin, default_mode)
    tree_params = config.tree_params_or(bagging_tree_params(variant))
    n_members = config.n_estimators
    logger.info(f"Fitting {variant} with {n_members} members, targets {targets.as_dict()}, n_jobs={config.n_jobs}")

    monitor = TrainingMonitor(dataset, config, variant)
    member_args = [(variant, dataset, targets, tree_params, config.inner_rounds, config.k_neighbors,
                    config.seed, index) for index in range(n_members)]
    if config.n_jobs == 1:
        results = [_fit_member(*args) for args in member_args]
    else:
        try:
            results = Parallel(n_jobs=config.n_jobs, verbose=0)(
                delayed(_fit_member)(*args) for args in member_args)
        except ImbalanceToolkitError as e:
            logger.error(f"{variant}: parallel member fit failed: {e}")
            raise

    members: List[Member] = []
    for index, (estimator, counts) in enumerate(results):
        member = Member(estimator, 1.0)
        members.append(member)
        monitor.record(member, index, counts, n_members)
    return build_model(variant, members, dataset, config, tree_params, monitor)
