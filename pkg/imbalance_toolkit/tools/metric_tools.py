from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Dict, Iterable, Optional, Sequence
import logging

import numpy as np
from sklearn.metrics import confusion_matrix as _tally

from ..errors import AbsentTrueClass, LabelOutOfRange, LengthMismatch, UnknownMetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """counts[i][j] = number of samples of true class i predicted as j."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def recalls(self) -> np.ndarray:
        support = self.support()
        absent = np.flatnonzero(support == 0)
        if absent.size:
            raise AbsentTrueClass(f"class {int(absent[0])} has no true samples; per-class recall is undefined")
        return np.diag(self.counts) / support

    def precisions(self) -> np.ndarray:
        predicted = self.counts.sum(axis=0)
        return np.divide(np.diag(self.counts), predicted,
                         out=np.zeros(self.n_classes), where=predicted > 0)

    def tolist(self):
        return self.counts.tolist()


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> ConfusionMatrix:
    """Tally (truth, prediction) pairs into a K x K matrix."""
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.size == 0 or y_true.size != y_pred.size:
        raise LengthMismatch(
            f"need equally long, nonempty label sequences (got {y_true.size} true, {y_pred.size} predicted)")
    for name, labels in (("true", y_true), ("predicted", y_pred)):
        if labels.min() < 0 or labels.max() >= n_classes:
            raise LabelOutOfRange(f"{name} labels must lie in [0, {n_classes})")
    counts = _tally(y_true, y_pred, labels=list(range(n_classes)))
    return ConfusionMatrix(np.asarray(counts, dtype=np.int64))


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall."""
    return float(np.mean(cm.recalls()))


def macro_fscore(cm: ConfusionMatrix) -> float:
    """Mean per-class F1; a never-predicted class has precision 0."""
    recalls = cm.recalls()
    precisions = cm.precisions()
    denominators = precisions + recalls
    f1 = np.divide(2 * precisions * recalls, denominators,
                   out=np.zeros(cm.n_classes), where=denominators > 0)
    return float(np.mean(f1))


def macro_gmean(cm: ConfusionMatrix) -> float:
    """K-th root of the product of per-class recalls."""
    recalls = cm.recalls()
    return float(np.prod(recalls) ** (1.0 / cm.n_classes))


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.total)


METRICS: Dict[str, Callable[[ConfusionMatrix], float]] = {
    "balanced_acc": balanced_accuracy,
    "macro_f1": macro_fscore,
    "macro_gmean": macro_gmean,
    "accuracy": accuracy,
}


def check_metric_names(names: Iterable[str]) -> tuple:
    """Validate metric names against the registry, keeping their order."""
    names = tuple(names)
    if not names:
        raise UnknownMetric("at least one metric name is required")
    for name in names:
        if name not in METRICS:
            raise UnknownMetric(f"unknown metric '{name}', expected one of {sorted(METRICS)}")
    return names


def score(name: str, y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> float:
    check_metric_names([name])
    return METRICS[name](confusion_matrix(y_true, y_pred, n_classes))


def score_all(cm: ConfusionMatrix, names: Iterable[str]) -> Dict[str, float]:
    return {name: METRICS[name](cm) for name in check_metric_names(names)}


def format_half_up(value: float, digits: int = 3) -> str:
    """Decimal string of `value` rounded half up to `digits` places."""
    quantum = Decimal(1).scaleb(-digits)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def evaluate_print(
    name: str,
    y_true: Sequence[int],
    y_pred: Sequence[int],
    n_classes: Optional[int] = None,
) -> str:
    """
    One-line summary of the imbalance-aware metrics.

    Returns:
        "<name> balanced Acc: <v> | macro Fscore: <v> | macro Gmean: <v>"
    """
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if n_classes is None:
        if y_true.size == 0:
            raise LengthMismatch("need nonempty label sequences")
        n_classes = int(max(y_true.max(), y_pred.max() if y_pred.size else 0)) + 1
    cm = confusion_matrix(y_true, y_pred, n_classes)
    line = (f"{name} balanced Acc: {format_half_up(balanced_accuracy(cm))} | "
            f"macro Fscore: {format_half_up(macro_fscore(cm))} | "
            f"macro Gmean: {format_half_up(macro_gmean(cm))}")
    logger.debug(line)
    return line
