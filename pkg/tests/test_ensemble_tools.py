import numpy as np
import pytest

from imbalance_toolkit.errors import InvalidConfig, InvalidDataset, ShapeMismatch, UnknownMetric
from imbalance_toolkit.tools.data_tools import Dataset
from imbalance_toolkit.tools.ensemble_tools import (
    EnsembleModel,
    LogRecord,
    Member,
    TrainConfig,
    TrainingLog,
    VerboseSpec,
    check_training_set,
    format_record,
)
from imbalance_toolkit.tools.metric_tools import METRICS, confusion_matrix, score_all
from imbalance_toolkit.tools.method_tools import fit_method
from imbalance_toolkit.tools.tree_tools import LEAF, FittedTree, TreeParams


def constant_tree(row, n_features=2):
    return FittedTree(
        feature=np.array([LEAF]),
        threshold=np.array([0.0]),
        left=np.array([LEAF]),
        right=np.array([LEAF]),
        value=np.array([row], dtype=float),
        n_features=n_features,
    )


def constant_model(rows, weights):
    members = [Member(constant_tree(row), w) for row, w in zip(rows, weights)]
    return EnsembleModel("manual", members, n_classes=len(rows[0]), n_features=2)


def test_vote_weighted_average():
    model = constant_model([[1.0, 0.0], [0.0, 1.0]], [3.0, 1.0])
    proba = model.predict_proba(np.zeros((4, 2)))
    assert np.allclose(proba, [[0.75, 0.25]] * 4)
    assert model.predict(np.zeros((1, 2))).tolist() == [0]
    assert np.allclose(model.predict_proba(np.zeros((1, 2)), n_members=1), [[1.0, 0.0]])


def test_ties_go_to_the_lowest_class():
    model = constant_model([[0.0, 0.5, 0.5], [0.0, 0.5, 0.5]], [1.0, 1.0])
    assert model.predict(np.zeros((3, 2))).tolist() == [1, 1, 1]


def test_model_validation():
    with pytest.raises(InvalidConfig):
        EnsembleModel("empty", [], n_classes=2, n_features=2)
    with pytest.raises(InvalidConfig):
        constant_model([[1.0, 0.0]], [0.0])
    with pytest.raises(ShapeMismatch):
        constant_model([[1.0, 0.0]], [1.0]).predict(np.zeros((2, 3)))


def test_verbose_spec_logs_every_k_plus_last():
    spec = VerboseSpec.from_value(10)
    assert [i for i in range(25) if spec.should_log(i, 25)] == [0, 10, 20, 24]
    assert not VerboseSpec.from_value(False).enabled
    assert VerboseSpec.from_value(True).granularity == 1
    with pytest.raises(InvalidConfig):
        VerboseSpec.from_value({'granularity': 2, 'colour': True})


def test_training_log_iterations_increase():
    log = TrainingLog()
    log.append(LogRecord(0, {}, {0: 1}))
    log.append(LogRecord(3, {}, {0: 1}))
    with pytest.raises(InvalidConfig):
        log.append(LogRecord(3, {}, {0: 1}))
    assert log.iterations == [0, 3]
    assert TrainingLog.from_dict(log.to_dict()).iterations == [0, 3]


def test_format_record_respects_print_flags():
    record = LogRecord(4, {'train': {'balanced_acc': 0.5}}, {0: 10, 1: 10})
    line = format_record(record, VerboseSpec(1, print_distribution=True, print_metrics=False))
    assert "counts 0:10, 1:10" in line
    assert "balanced_acc" not in line
    assert "train balanced_acc=0.500" in format_record(record, VerboseSpec(1))


def test_train_config_validation():
    with pytest.raises(InvalidConfig):
        TrainConfig(n_estimators=0)
    with pytest.raises(UnknownMetric):
        TrainConfig(eval_metrics=("auc",))
    with pytest.raises(InvalidConfig):
        TrainConfig(n_jobs=0)
    assert 'n_jobs' not in TrainConfig(n_jobs=4).echo(TreeParams())


def test_single_class_training_set_is_rejected():
    with pytest.raises(InvalidDataset):
        check_training_set(Dataset(np.zeros((5, 2)), [0] * 5, n_classes=2))


def test_final_log_record_matches_post_hoc_evaluation(snippet_split):
    train, test = snippet_split
    records = []
    config = TrainConfig(n_estimators=12, train_verbose=5, eval_datasets={'test': test},
                         seed=3, log_callback=records.append)
    model = fit_method("rus-boost", train, config)

    assert model.training_log.iterations[0] == 0
    assert model.training_log.iterations[-1] == model.n_members - 1
    assert [r.iteration for r in records] == model.training_log.iterations
    final = model.training_log.records[-1]
    assert set(final.metrics) == {'train', 'test'}
    for name, dataset in (('train', train), ('test', test)):
        cm = confusion_matrix(dataset.labels, model.predict(dataset.features), model.n_classes)
        expected = score_all(cm, METRICS)
        assert final.metrics[name] == pytest.approx(expected)


def test_user_eval_set_named_train_replaces_the_training_set(snippet_split):
    train, test = snippet_split
    config = TrainConfig(n_estimators=3, train_verbose=1, eval_datasets={'train': test})
    model = fit_method("under-bagging", train, config)
    cm = confusion_matrix(test.labels, model.predict(test.features), model.n_classes)
    assert model.training_log.records[-1].metrics['train'] == pytest.approx(score_all(cm, METRICS))
