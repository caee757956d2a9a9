"""End-to-end statistical checks over many master seeds (run with -m slow)."""
import re

import numpy as np
import pytest

from imbalance_toolkit.cli import main
from imbalance_toolkit.tools.data_tools import generate_imbalance_data
from imbalance_toolkit.tools.ensemble_tools import TrainConfig
from imbalance_toolkit.tools.method_tools import METHODS, fit_method
from imbalance_toolkit.tools.metric_tools import balanced_accuracy, confusion_matrix, macro_gmean

pytestmark = pytest.mark.slow

LINE = re.compile(r"^SPE balanced Acc: (\d\.\d{3}) \| macro Fscore: (\d\.\d{3}) \| macro Gmean: (\d\.\d{3})$")


def test_self_paced_pipeline_reaches_the_reference_band(tmp_path, capsys):
    balanced, gmean = [], []
    for seed in range(10):
        train, test, model = (tmp_path / f"train{seed}.csv", tmp_path / f"test{seed}.csv",
                              tmp_path / f"spe{seed}.json")
        assert main(['generate', '--n-samples', '200', '--weights', '0.9,0.1', '--test-fraction', '0.5',
                     '--seed', str(seed), '--train-out', str(train), '--test-out', str(test)]) == 0
        assert main(['train', '--method', 'self-paced-ensemble', '--train', str(train),
                     '--seed', str(seed), '--model-out', str(model)]) == 0
        capsys.readouterr()
        assert main(['evaluate', '--model', str(model), '--test', str(test), '--name', 'SPE']) == 0
        match = LINE.match(capsys.readouterr().out.strip().splitlines()[-1])
        assert match is not None
        balanced.append(float(match.group(1)))
        gmean.append(float(match.group(3)))
    assert 0.88 <= np.median(balanced) <= 1.0
    assert 0.88 <= np.median(gmean) <= 1.0


def test_smoteboost_median_balanced_accuracy():
    scores = []
    for seed in range(10):
        train, test = generate_imbalance_data(n_samples=200, class_weights=(0.9, 0.1), seed=seed)
        model = fit_method("smote-boost", train, TrainConfig(seed=seed))
        scores.append(balanced_accuracy(confusion_matrix(test.labels, model.predict(test.features), 2)))
    assert np.median(scores) > 0.85


def test_every_method_beats_a_single_tree_on_balanced_accuracy():
    splits = [generate_imbalance_data(n_samples=2000, class_weights=(0.9, 0.1), seed=seed) for seed in range(10)]

    def median_scores(method_id):
        balanced, plain = [], []
        for seed, (train, test) in enumerate(splits):
            model = fit_method(method_id, train, TrainConfig(seed=seed))
            cm = confusion_matrix(test.labels, model.predict(test.features), 2)
            balanced.append(balanced_accuracy(cm))
            plain.append(float(np.trace(cm.counts) / cm.total))
        return float(np.median(balanced)), float(np.median(plain))

    tree_balanced, tree_plain = median_scores("decision-tree")
    assert tree_plain >= tree_balanced
    for method_id in METHODS:
        method_balanced, _ = median_scores(method_id)
        assert method_balanced >= tree_balanced, method_id


def test_multiclass_gmean_is_defined_for_every_method():
    train, test = generate_imbalance_data(n_samples=540, class_weights=(20, 5, 2), seed=0)
    for method_id in METHODS:
        model = fit_method(method_id, train, TrainConfig(n_estimators=5))
        cm = confusion_matrix(test.labels, model.predict(test.features), 3)
        assert 0.0 <= macro_gmean(cm) <= 1.0
