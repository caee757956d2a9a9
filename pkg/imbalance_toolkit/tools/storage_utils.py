"""File storage for datasets (CSV), model files (JSON) and rendered outputs."""
from typing import Any, Dict, Optional, Sequence
import json
import logging
import os
import tempfile

import numpy as np
import pandas as pd

from ..errors import InvalidDataset, ModelFormatError, UnknownClass
from .data_tools import Dataset
from .ensemble_tools import EnsembleModel, Member, TrainingLog
from .shared_tools import encode_labels

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MODEL_KEYS = ("format_version", "method_id", "config", "n_classes", "class_names", "n_features",
              "members", "training_log")
DEFAULT_LABEL_COLUMN = "label"


def save_file_atomic(content: str, path: str) -> Dict[str, Any]:
    """
    Write a whole text file atomically: a temp file in the target directory, then os.replace

    Args:
        content: file text, written as UTF-8 with newlines untranslated
        path: destination path

    Returns:
        dict with storage results
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    logger.debug(f"Saving file: {path}")
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        os.replace(temp_path, path)
    except Exception as e:
        logger.error(f"Failed to save {path}: {e}")
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise
    return {
        'storage_type': 'local',
        'local_path': path,
        'filename': os.path.basename(path),
    }


def load_file_from_storage(path: str) -> str:
    """Local path of an existing input file."""
    if not os.path.exists(path):
        raise InvalidDataset(f"file not found: {path}")
    logger.debug(f"File found at: {path}")
    return path


def dataset_to_csv_text(dataset: Dataset) -> str:
    """CSV with header f0..f{d-1},label; floats carry 17 significant digits."""
    columns = {f"f{j}": dataset.features[:, j] for j in range(dataset.n_features)}
    if dataset.class_names is not None:
        labels = [dataset.class_names[c] for c in dataset.labels]
    else:
        labels = dataset.labels
    frame = pd.DataFrame(columns)
    frame[DEFAULT_LABEL_COLUMN] = labels
    return frame.to_csv(index=False, float_format='%.17g', lineterminator='\n')


def write_dataset_csv(dataset: Dataset, path: str) -> Dict[str, Any]:
    result = save_file_atomic(dataset_to_csv_text(dataset), path)
    logger.info(f"Wrote {dataset.n_samples} rows to {path}")
    return result


def _labels_with_names(values: np.ndarray, class_names: Sequence[str]) -> np.ndarray:
    lookup = {name: i for i, name in enumerate(class_names)}
    codes = np.empty(len(values), dtype=np.int64)
    for row, value in enumerate(values):
        key = str(value)
        if key not in lookup:
            raise UnknownClass(f"label '{key}' is not one of the model's classes {list(class_names)}")
        codes[row] = lookup[key]
    return codes


def read_dataset_csv(
    path: str,
    label_column: str = DEFAULT_LABEL_COLUMN,
    class_names: Optional[Sequence[str]] = None,
    n_classes: Optional[int] = None,
) -> Dataset:
    """
    Load a labelled CSV file.

    Args:
        path: CSV path (UTF-8, header required)
        label_column: name of the label column
        class_names: encode labels with this class list (e.g. a model's) instead of
            inferring the encoding
        n_classes: without class_names, read labels as integer ids in [0, n_classes)

    Returns:
        Dataset with every other column as a numeric feature
    """
    load_file_from_storage(path)
    try:
        frame = pd.read_csv(path, float_precision='round_trip', encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        logger.error(f"Could not parse {path}: {e}")
        raise InvalidDataset(f"{path}: not a readable CSV file ({e})")
    if label_column not in frame.columns:
        raise InvalidDataset(f"{path}: no '{label_column}' column (columns: {list(frame.columns)})")
    if frame.empty:
        raise InvalidDataset(f"{path}: no data rows")

    feature_frame = frame.drop(columns=[label_column])
    non_numeric = [c for c in feature_frame.columns if not pd.api.types.is_numeric_dtype(feature_frame[c])]
    if non_numeric:
        raise InvalidDataset(f"{path}: feature column '{non_numeric[0]}' is not numeric")
    if frame[label_column].isna().any():
        raise InvalidDataset(f"{path}: missing labels")
    features = feature_frame.to_numpy(dtype=float)

    raw_labels = frame[label_column].to_numpy()
    if class_names is not None:
        return Dataset(features, _labels_with_names(raw_labels, class_names), class_names=tuple(class_names))
    if n_classes is not None:
        if not pd.api.types.is_numeric_dtype(frame[label_column]):
            raise InvalidDataset(f"{path}: labels must be integer class ids for this model")
        return Dataset(features, raw_labels, n_classes=n_classes)
    labels, names = encode_labels(raw_labels)
    return Dataset(features, labels, class_names=tuple(names) if names is not None else None)


def model_to_document(model: EnsembleModel) -> Dict[str, Any]:
    return {
        'format_version': MODEL_FORMAT_VERSION,
        'method_id': model.method_id,
        'config': model.config,
        'n_classes': model.n_classes,
        'class_names': list(model.class_names) if model.class_names is not None else None,
        'n_features': model.n_features,
        'members': [m.to_dict() for m in model.members],
        'training_log': model.training_log.to_dict(),
    }


def model_from_document(document: Dict[str, Any]) -> EnsembleModel:
    if not isinstance(document, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = document.get('format_version')
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r}, expected {MODEL_FORMAT_VERSION}")
    missing = [key for key in MODEL_KEYS if key not in document]
    if missing:
        raise ModelFormatError(f"model file lacks '{missing[0]}'")
    try:
        class_names = document['class_names']
        return EnsembleModel(
            method_id=str(document['method_id']),
            members=[Member.from_dict(m) for m in document['members']],
            n_classes=int(document['n_classes']),
            n_features=int(document['n_features']),
            class_names=tuple(class_names) if class_names is not None else None,
            training_log=TrainingLog.from_dict(document['training_log']),
            config=dict(document['config']),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed model file: {e}")


def model_to_json(model: EnsembleModel) -> str:
    return json.dumps(model_to_document(model), indent=1, allow_nan=False) + "\n"


def save_model(model: EnsembleModel, path: str) -> Dict[str, Any]:
    """Write the model file (format_version 1) atomically."""
    result = save_file_atomic(model_to_json(model), path)
    logger.info(f"Saved {model.method_id} model with {model.n_members} member(s) to {path}")
    return result


def load_model(path: str) -> EnsembleModel:
    """Read a model file; unknown versions and malformed documents raise ModelFormatError."""
    load_file_from_storage(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"{path}: not a JSON model file ({e})")
    model = model_from_document(document)
    logger.debug(f"Loaded {model.method_id} model from {path}")
    return model
