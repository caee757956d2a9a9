import json

import numpy as np
import pytest

from imbalance_toolkit.errors import InvalidDataset, ModelFormatError, UnknownClass
from imbalance_toolkit.tools.data_tools import Dataset
from imbalance_toolkit.tools.ensemble_tools import TrainConfig
from imbalance_toolkit.tools.method_tools import fit_method
from imbalance_toolkit.tools.storage_utils import (
    load_model,
    model_to_document,
    model_to_json,
    read_dataset_csv,
    save_file_atomic,
    save_model,
    write_dataset_csv,
)


def test_dataset_csv_round_trip(tmp_path, three_class_blobs):
    path = tmp_path / "data.csv"
    write_dataset_csv(three_class_blobs, str(path))
    assert path.read_text().splitlines()[0] == "f0,f1,label"
    restored = read_dataset_csv(str(path))
    assert np.array_equal(restored.features, three_class_blobs.features)
    assert np.array_equal(restored.labels, three_class_blobs.labels)


def test_string_labels_become_class_names(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("x,label\n0.5,spam\n1.5,ham\n2.5,spam\n")
    dataset = read_dataset_csv(str(path))
    assert dataset.class_names == ("ham", "spam")
    assert dataset.labels.tolist() == [1, 0, 1]
    with pytest.raises(UnknownClass):
        other = tmp_path / "other.csv"
        other.write_text("x,label\n0.5,eggs\n")
        read_dataset_csv(str(other), class_names=dataset.class_names)


def test_bad_csv_files(tmp_path):
    with pytest.raises(InvalidDataset):
        read_dataset_csv(str(tmp_path / "missing.csv"))
    no_label = tmp_path / "nolabel.csv"
    no_label.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidDataset):
        read_dataset_csv(str(no_label))
    text_feature = tmp_path / "text.csv"
    text_feature.write_text("a,label\nx,0\ny,1\n")
    with pytest.raises(InvalidDataset):
        read_dataset_csv(str(text_feature))


def test_model_round_trip(tmp_path, binary_blobs):
    model = fit_method("easy-ensemble", binary_blobs, TrainConfig(n_estimators=3, inner_rounds=2, train_verbose=1))
    path = tmp_path / "model.json"
    save_model(model, str(path))
    restored = load_model(str(path))
    assert model_to_json(restored) == path.read_text()
    assert np.array_equal(restored.predict_proba(binary_blobs.features), model.predict_proba(binary_blobs.features))
    assert restored.training_log.iterations == model.training_log.iterations
    document = json.loads(path.read_text())
    assert document['format_version'] == 1
    assert 'n_jobs' not in document['config']


def test_model_with_class_names_keeps_them(tmp_path):
    dataset = Dataset(np.array([[0.0], [0.1], [5.0], [5.1]]), [0, 0, 1, 1], class_names=("no", "yes"))
    model = fit_method("decision-tree", dataset, TrainConfig())
    path = tmp_path / "named.json"
    save_model(model, str(path))
    assert load_model(str(path)).class_names == ("no", "yes")


@pytest.mark.parametrize("change", [
    {'format_version': 2},
    {'members': [{'vote_weight': 1.0, 'estimator': {'kind': 'forest'}}]},
])
def test_bad_model_documents(tmp_path, binary_blobs, change):
    model = fit_method("decision-tree", binary_blobs, TrainConfig())
    document = {**model_to_document(model), **change}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(document))
    with pytest.raises(ModelFormatError):
        load_model(str(path))


def test_model_document_missing_key(tmp_path, binary_blobs):
    document = model_to_document(fit_method("decision-tree", binary_blobs, TrainConfig()))
    del document['training_log']
    path = tmp_path / "partial.json"
    path.write_text(json.dumps(document))
    with pytest.raises(ModelFormatError, match="training_log"):
        load_model(str(path))


def test_not_json(tmp_path):
    path = tmp_path / "garbage.json"
    path.write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(str(path))


def test_atomic_save_leaves_no_temp_files(tmp_path):
    result = save_file_atomic("hello\n", str(tmp_path / "sub" / "out.txt"))
    assert result['filename'] == "out.txt"
    assert sorted(p.name for p in (tmp_path / "sub").iterdir()) == ["out.txt"]


def test_atomic_save_cleans_up_when_the_target_is_a_directory(tmp_path):
    (tmp_path / "taken").mkdir()
    with pytest.raises(OSError):
        save_file_atomic("hello\n", str(tmp_path / "taken"))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["taken"]
