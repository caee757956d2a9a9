"""
Prefix-ensemble performance curves and confusion heatmaps.

The visualizer evaluates the sub-ensembles made of the first p members of every
fitted model on every dataset (prediction only, never refitting), then turns the cache
into long-format tables, confusion matrices and deterministic SVG renderings.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
import io
import logging
import os
import re

from joblib import Parallel, delayed
import matplotlib
matplotlib.use('Agg')  # Must be before importing pyplot
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from ..errors import EmptyData, EmptyInput, IncompatibleFeatureWidth, InvalidConfig, UnknownName
from .data_tools import Dataset
from .ensemble_tools import EnsembleModel, ensemble_predict
from .metric_tools import METRICS, ConfusionMatrix, confusion_matrix, score_all
from .storage_utils import save_file_atomic

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["model", "dataset", "prefix_size", "metric", "value"]

# Fixed so equal inputs give byte-identical SVG files
SVG_RC = {
    'svg.hashsalt': 'imbalance-toolkit',
    'svg.fonttype': 'none',
    'path.simplify': False,
}


@dataclass(frozen=True, eq=False)
class CacheEntry:
    metrics: Dict[str, float]
    confusion: ConfusionMatrix


@dataclass(frozen=True, eq=False)
class HeatmapData:
    matrix: ConfusionMatrix
    row_names: Tuple[str, ...]
    column_names: Tuple[str, ...]


@dataclass(eq=False)
class VisualizerState:
    """Fitted visualizer: inputs, per-model prefix grids and the (model, dataset, prefix) cache."""

    models: Dict[str, EnsembleModel]
    datasets: Dict[str, Dataset]
    granularity: int
    grids: Dict[str, List[int]] = field(default_factory=dict)
    cache: Dict[Tuple[str, str, int], CacheEntry] = field(default_factory=dict)

    def entry(self, model_name: str, dataset_name: str, prefix_size: int) -> CacheEntry:
        return self.cache[(model_name, dataset_name, prefix_size)]


def prefix_grid(n_members: int, granularity: int) -> List[int]:
    """Prefix sizes {1, g, 2g, ...} up to T, always including 1 and T."""
    if granularity < 1:
        raise InvalidConfig(f"granularity must be at least 1, got {granularity}")
    sizes = set(range(granularity, n_members + 1, granularity))
    sizes.update({1, n_members})
    return sorted(sizes)


def _evaluate_prefix(model: EnsembleModel, dataset: Dataset, prefix_size: int) -> CacheEntry:
    predictions = ensemble_predict(model, dataset.features, n_members=prefix_size)
    cm = confusion_matrix(dataset.labels, predictions, model.n_classes)
    return CacheEntry(metrics=score_all(cm, METRICS), confusion=cm)


def fit_visualizer(
    models: Mapping[str, EnsembleModel],
    datasets: Mapping[str, Dataset],
    granularity: int = 1,
    n_jobs: int = 1,
) -> VisualizerState:
    """
    Evaluate every prefix sub-ensemble of every model on every dataset.

    Args:
        models: name -> fitted model
        datasets: name -> labelled dataset
        granularity: prefix grid step g
        n_jobs: joblib workers for the cache; results do not depend on it

    Returns:
        VisualizerState whose cache covers exactly each model's prefix grid
    """
    if not models:
        raise EmptyInput("the visualizer needs at least one model")
    if not datasets:
        raise EmptyInput("the visualizer needs at least one dataset")
    for model_name, model in models.items():
        for dataset_name, dataset in datasets.items():
            if dataset.n_features != model.n_features:
                raise IncompatibleFeatureWidth(
                    f"model '{model_name}' expects {model.n_features} features, "
                    f"dataset '{dataset_name}' has {dataset.n_features}")

    state = VisualizerState(models=dict(models), datasets=dict(datasets), granularity=granularity)
    state.grids = {name: prefix_grid(model.n_members, granularity) for name, model in state.models.items()}
    keys = [(m, d, p) for m in state.models for d in state.datasets for p in state.grids[m]]
    logger.info(f"Evaluating {len(keys)} prefix ensembles for {len(state.models)} model(s)")

    if n_jobs == 1:
        entries = [_evaluate_prefix(state.models[m], state.datasets[d], p) for m, d, p in keys]
    else:
        entries = Parallel(n_jobs=n_jobs, verbose=0)(
            delayed(_evaluate_prefix)(state.models[m], state.datasets[d], p) for m, d, p in keys)
    state.cache = dict(zip(keys, entries))
    return state


def _selection(requested: Optional[Sequence[str]], available: Sequence[str], kind: str) -> List[str]:
    if requested is None:
        return list(available)
    requested = list(requested)
    if not requested:
        raise UnknownName(f"empty {kind} selection")
    unknown = [name for name in requested if name not in available]
    if unknown:
        raise UnknownName(f"unknown {kind} '{unknown[0]}', expected one of {list(available)}")
    return requested


def performance_lineplot_data(
    state: VisualizerState,
    metrics: Optional[Sequence[str]] = None,
    datasets: Optional[Sequence[str]] = None,
    models: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """Long-format table (model, dataset, prefix_size, metric, value) of the cached curves."""
    metric_names = _selection(metrics, list(METRICS), "metric")
    dataset_names = _selection(datasets, list(state.datasets), "dataset")
    model_names = _selection(models, list(state.models), "model")

    rows = []
    for m in model_names:
        for d in dataset_names:
            for p in state.grids[m]:
                entry = state.entry(m, d, p)
                rows.extend((m, d, p, metric, entry.metrics[metric]) for metric in metric_names)
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    return table.sort_values(["model", "dataset", "prefix_size", "metric"], kind='stable').reset_index(drop=True)


def confusion_matrix_heatmap_data(state: VisualizerState, model_name: str, dataset_name: str) -> HeatmapData:
    """Full-model confusion matrix on one dataset, with class names for both axes."""
    _selection([model_name], list(state.models), "model")
    _selection([dataset_name], list(state.datasets), "dataset")
    model = state.models[model_name]
    entry = state.entry(model_name, dataset_name, model.n_members)
    names = tuple(model.class_label(c) for c in range(model.n_classes))
    return HeatmapData(matrix=entry.confusion, row_names=names, column_names=names)


def _figure_to_svg(fig) -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return buffer.getvalue()


def _render_lineplot(table: pd.DataFrame, title: Optional[str]) -> str:
    metric_names = list(dict.fromkeys(table["metric"]))
    fig, axes = plt.subplots(1, len(metric_names), figsize=(5 * len(metric_names), 4), squeeze=False)
    for ax, metric in zip(axes[0], metric_names):
        subset = table[table["metric"] == metric]
        for (model_name, dataset_name), series in subset.groupby(["model", "dataset"], sort=True):
            ax.plot(series["prefix_size"], series["value"], marker='o', label=f"{model_name} / {dataset_name}")
        ax.set_title(metric)
        ax.set_xlabel("ensemble size")
        ax.set_ylabel(metric)
        ax.grid(True)
        ax.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _figure_to_svg(fig)


def _render_heatmap(data: HeatmapData, title: Optional[str]) -> str:
    fig, ax = plt.subplots(figsize=(1.2 * len(data.row_names) + 2, 1.2 * len(data.row_names) + 1.5))
    sns.heatmap(pd.DataFrame(data.matrix.counts, index=data.row_names, columns=data.column_names),
                annot=True, fmt='d', cmap='Blues', cbar=False, linewidths=0.5, ax=ax)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _figure_to_svg(fig)


def render_svg(data: Union[pd.DataFrame, HeatmapData, ConfusionMatrix], title: Optional[str] = None) -> str:
    """
    Render a long-format table as line charts (one panel per metric, one series per
    model/dataset pair) or a confusion matrix as an annotated heatmap.

    Returns:
        SVG document text; equal inputs give identical bytes
    """
    with matplotlib.rc_context(SVG_RC):
        if isinstance(data, pd.DataFrame):
            if data.empty:
                raise EmptyData("nothing to plot: the table is empty")
            return _render_lineplot(data, title)
        if isinstance(data, ConfusionMatrix):
            names = tuple(str(c) for c in range(data.n_classes))
            data = HeatmapData(data, names, names)
        if data.matrix.counts.size == 0:
            raise EmptyData("nothing to plot: the matrix is empty")
        return _render_heatmap(data, title)


def _file_stem(name: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.-]', '_', name)


def write_visualizer_outputs(state: VisualizerState, out_dir: str) -> List[str]:
    """
    Write performance.csv/.svg and confusion_<model>_<dataset>.csv/.svg into `out_dir`.

    Returns:
        paths of the written files
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    table = performance_lineplot_data(state)
    csv_text = table.to_csv(index=False, float_format='%.17g', lineterminator='\n')
    written.append(save_file_atomic(csv_text, os.path.join(out_dir, "performance.csv"))['local_path'])
    written.append(save_file_atomic(render_svg(table, "Performance by ensemble size"),
                                    os.path.join(out_dir, "performance.svg"))['local_path'])

    for model_name in state.models:
        for dataset_name in state.datasets:
            heatmap = confusion_matrix_heatmap_data(state, model_name, dataset_name)
            stem = f"confusion_{_file_stem(model_name)}_{_file_stem(dataset_name)}"
            frame = pd.DataFrame(heatmap.matrix.counts, index=list(heatmap.row_names),
                                 columns=list(heatmap.column_names))
            written.append(save_file_atomic(frame.to_csv(index_label="true", lineterminator='\n'),
                                            os.path.join(out_dir, f"{stem}.csv"))['local_path'])
            written.append(save_file_atomic(render_svg(heatmap, f"{model_name} on {dataset_name}"),
                                            os.path.join(out_dir, f"{stem}.svg"))['local_path'])

    logger.info(f"Wrote {len(written)} visualizer files to {out_dir}")
    return written
