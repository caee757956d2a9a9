"""Registry of the ensemble imbalanced-learning methods and their CLI ids."""
from dataclasses import dataclass
from typing import Callable, Dict, Optional
import logging

from ..errors import UnknownMethod
from .bagging_tools import bagging_tree_params, fit_bagging_ensemble
from .boosting_tools import BOOSTING_TREE_PARAMS, fit_resample_boost, fit_reweight_boost, fit_samme
from .data_tools import Dataset
from .ensemble_tools import EnsembleModel, TrainConfig
from .iterative_tools import ITERATIVE_TREE_PARAMS, fit_balance_cascade, fit_self_paced_ensemble, fit_single_tree
from .tree_tools import TreeParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodInfo:
    """
    One registered method.

    family is the trainer that fits it and variant the name that trainer knows it by;
    solution lists the imbalance remedies used (US under-sampling, OS over-sampling,
    RW reweighting) and ensemble is "iterative" or "parallel".
    """

    method_id: str
    family: str
    variant: Optional[str]
    solution: str
    ensemble: str

    @property
    def uses_cost_matrix(self) -> bool:
        return self.family == "reweight_boost"


METHODS: Dict[str, MethodInfo] = {m.method_id: m for m in (
    MethodInfo("self-paced-ensemble", "self_paced", None, "US", "iterative"),
    MethodInfo("balance-cascade", "cascade", None, "US", "iterative"),
    MethodInfo("balanced-random-forest", "bagging", "balanced_random_forest", "US", "parallel"),
    MethodInfo("easy-ensemble", "bagging", "easyensemble", "US,RW", "parallel"),
    MethodInfo("rus-boost", "resample_boost", "rusboost", "US,RW", "iterative"),
    MethodInfo("under-bagging", "bagging", "underbagging", "US", "parallel"),
    MethodInfo("over-boost", "resample_boost", "overboost", "OS,RW", "iterative"),
    MethodInfo("smote-boost", "resample_boost", "smoteboost", "OS,RW", "iterative"),
    MethodInfo("kmeans-smote-boost", "resample_boost", "kmeans_smoteboost", "OS,RW", "iterative"),
    MethodInfo("over-bagging", "bagging", "overbagging", "OS", "parallel"),
    MethodInfo("smote-bagging", "bagging", "smotebagging", "OS", "parallel"),
    MethodInfo("ada-cost", "reweight_boost", "adacost", "RW", "iterative"),
    MethodInfo("ada-uboost", "reweight_boost", "adauboost", "RW", "iterative"),
    MethodInfo("asym-boost", "reweight_boost", "asymboost", "RW", "iterative"),
)}

# Reference classifiers used by comparisons; not imbalance-aware
BASELINES: Dict[str, Callable[[Dataset, TrainConfig], EnsembleModel]] = {
    "decision-tree": fit_single_tree,
    "ada-boost": fit_samme,
}


def method_info(method_id: str) -> MethodInfo:
    if method_id not in METHODS:
        raise UnknownMethod(f"unknown method '{method_id}', expected one of: {', '.join(METHODS)}")
    return METHODS[method_id]


def default_tree_params(method_id: str) -> TreeParams:
    """Base tree a method (or baseline) fits when TrainConfig.tree_params is None."""
    if method_id == "ada-boost":
        return BOOSTING_TREE_PARAMS
    if method_id == "decision-tree":
        return ITERATIVE_TREE_PARAMS
    info = method_info(method_id)
    if info.family == "bagging":
        return bagging_tree_params(info.variant)
    if info.family in ("resample_boost", "reweight_boost"):
        return BOOSTING_TREE_PARAMS
    return ITERATIVE_TREE_PARAMS


def fit_method(method_id: str, dataset: Dataset, config: TrainConfig, cost_matrix=None) -> EnsembleModel:
    """
    Fit any registered method (or baseline) by id.

    Args:
        method_id: kebab-case id from METHODS or BASELINES
        dataset: training data
        config: training configuration
        cost_matrix: strategy name or K x K matrix; only the reweighting methods use it

    Returns:
        the fitted EnsembleModel, its method_id set to `method_id`
    """
    if method_id in BASELINES:
        model = BASELINES[method_id](dataset, config)
    else:
        info = method_info(method_id)
        if cost_matrix is not None and not info.uses_cost_matrix:
            logger.warning(f"{method_id} does not use a cost matrix; ignoring it")
        if info.family == "self_paced":
            model = fit_self_paced_ensemble(dataset, config)
        elif info.family == "cascade":
            model = fit_balance_cascade(dataset, config)
        elif info.family == "bagging":
            model = fit_bagging_ensemble(info.variant, dataset, config)
        elif info.family == "resample_boost":
            model = fit_resample_boost(info.variant, dataset, config)
        else:
            model = fit_reweight_boost(info.variant, dataset, cost_matrix, config)
    model.method_id = method_id
    return model
