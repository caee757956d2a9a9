"""Command-line harness: generate data, train, evaluate, compare and visualize ensembles."""
from typing import Dict, List, Optional, Sequence
import argparse
import dataclasses
import math
import os
import sys

import numpy as np
import pandas as pd

from .errors import ImbalanceToolkitError, InvalidConfig, TrainingError
from .logging_config import get_logger
from .tools.data_tools import Dataset, generate_imbalance_data
from .tools.ensemble_tools import (
    DEFAULT_N_ESTIMATORS,
    TrainConfig,
    VerboseSpec,
    describe_model,
    ensemble_predict,
    format_record,
)
from .tools.metric_tools import METRICS, confusion_matrix, evaluate_print, score_all
from .tools.method_tools import BASELINES, METHODS, default_tree_params, fit_method, method_info
from .tools.storage_utils import (
    DEFAULT_LABEL_COLUMN,
    load_model,
    read_dataset_csv,
    save_file_atomic,
    save_model,
    write_dataset_csv,
)
from .tools.tree_tools import TreeParams
from .tools.visualizer_tools import fit_visualizer, write_visualizer_outputs

logger = get_logger('imbalance_toolkit.cli')

default_seed = int(os.environ.get('IMBENS_SEED', '0'))
default_jobs = int(os.environ.get('IMBENS_JOBS', '1'))

COMPARE_COLUMNS = ["method", "seed", "metric", "value", "reason"]


def _parse_floats(flag: str, text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise InvalidConfig(f"{flag}: expected comma-separated numbers, got '{text}'")


def _parse_named_paths(flag: str, values: Optional[Sequence[str]]) -> Dict[str, str]:
    """NAME=PATH pairs, keeping command-line order."""
    named = {}
    for value in values or []:
        name, sep, path = value.partition('=')
        if not sep or not name or not path:
            raise InvalidConfig(f"{flag}: expected NAME=PATH, got '{value}'")
        if name in named:
            raise InvalidConfig(f"{flag}: name '{name}' given twice")
        named[name] = path
    return named


def _parse_target_samples(text: Optional[str]):
    """An integer, or class:count pairs like 0:10,1:20."""
    if text is None:
        return None
    try:
        if ':' not in text:
            return int(text)
        pairs = (part.split(':') for part in text.split(',') if part.strip())
        return {int(c): int(n) for c, n in pairs}
    except ValueError:
        raise InvalidConfig(f"--n-target-samples: expected N or CLASS:N[,CLASS:N...], got '{text}'")


def _parse_cost_matrix(text: Optional[str]):
    """A strategy name, or K*K row-major numbers."""
    if text is None:
        return None
    if text and (text[0].isalpha()):
        return text
    values = _parse_floats("--cost-matrix", text)
    size = int(round(math.sqrt(len(values))))
    if size * size != len(values) or size < 2:
        raise InvalidConfig(f"--cost-matrix: {len(values)} values do not form a K x K matrix")
    return np.asarray(values).reshape(size, size).tolist()


def _parse_max_features(text: str):
    if text in ("all", "sqrt"):
        return text
    try:
        return int(text)
    except ValueError:
        raise InvalidConfig(f"--max-features: expected all, sqrt or a count, got '{text}'")


def _tree_params(args) -> Optional[TreeParams]:
    """Tree flags given on the command line, the rest filled from the method's own base tree."""
    overrides = {}
    if args.max_depth is not None:
        overrides['max_depth'] = args.max_depth
    if args.min_samples_leaf is not None:
        overrides['min_samples_leaf'] = args.min_samples_leaf
    if args.max_features is not None:
        overrides['max_features'] = _parse_max_features(args.max_features)
    if not overrides:
        return None
    return dataclasses.replace(default_tree_params(args.method), **overrides)


def _read_like(path: str, reference, label_column: str) -> Dataset:
    """Read a CSV encoding labels the same way as `reference` (a Dataset or a model)."""
    if reference.class_names is not None:
        return read_dataset_csv(path, label_column, class_names=reference.class_names)
    return read_dataset_csv(path, label_column, n_classes=reference.n_classes)


def _train_config(args, seed: int, eval_datasets: Dict[str, Dataset], callback=None) -> TrainConfig:
    return TrainConfig(
        n_estimators=args.n_estimators,
        tree_params=_tree_params(args),
        balancing_schedule=args.balancing_schedule,
        target_label=args.target_label,
        n_target_samples=_parse_target_samples(args.n_target_samples),
        eval_datasets=eval_datasets,
        eval_metrics=tuple(args.eval_metrics.split(',')) if args.eval_metrics else tuple(METRICS),
        train_verbose=args.train_verbose,
        seed=seed,
        n_jobs=args.jobs,
        inner_rounds=args.inner_rounds,
        k_neighbors=args.k_neighbors,
        n_clusters=args.n_clusters,
        k_bins=args.k_bins,
        log_callback=callback,
    )


def cmd_generate(args) -> int:
    weights = _parse_floats("--weights", args.weights)
    if len(weights) < 2:
        raise InvalidConfig(f"--weights: need >=2 classes, got {len(weights)}")
    if not all(math.isfinite(w) and w > 0 for w in weights):
        raise InvalidConfig(f"--weights: every weight must be positive, got {args.weights}")
    if not 0.0 < args.test_fraction < 1.0:
        raise InvalidConfig(f"--test-fraction: must lie in (0, 1), got {args.test_fraction}")
    if args.n_samples < len(weights):
        raise InvalidConfig(f"--n-samples: need at least one sample per class ({len(weights)}), got {args.n_samples}")
    if args.n_features < 1:
        raise InvalidConfig(f"--n-features: need at least 1, got {args.n_features}")
    train, test = generate_imbalance_data(
        n_samples=args.n_samples,
        class_weights=weights,
        n_features=args.n_features,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    write_dataset_csv(train, args.train_out)
    write_dataset_csv(test, args.test_out)
    return 0


def cmd_train(args) -> int:
    method_info(args.method)
    train = read_dataset_csv(args.train, args.label_column)
    eval_datasets = {name: _read_like(path, train, args.label_column)
                     for name, path in _parse_named_paths("--eval", args.eval).items()}
    verbose = VerboseSpec.from_value(args.train_verbose)
    config = _train_config(args, args.seed, eval_datasets,
                           callback=lambda record: print(format_record(record, verbose), flush=True))
    model = fit_method(args.method, train, config, cost_matrix=_parse_cost_matrix(args.cost_matrix))
    if 'cost_matrix' in model.config:
        logger.info(f"Cost matrix: {model.config['cost_matrix']}")
    logger.info(f"Model summary: {describe_model(model)}")
    save_model(model, args.model_out)
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    test = _read_like(args.test, model, args.label_column)
    predictions = ensemble_predict(model, test.features)
    print(evaluate_print(args.name, test.labels, predictions, n_classes=model.n_classes))
    return 0


def _compare_rows(method_id: str, seed: int, train: Dataset, test: Dataset, args) -> List[dict]:
    try:
        config = _train_config(argparse.Namespace(**{**vars(args), 'method': method_id}), seed, {})
        model = fit_method(method_id, train, config, cost_matrix=_parse_cost_matrix(args.cost_matrix))
        cm = confusion_matrix(test.labels, ensemble_predict(model, test.features), model.n_classes)
        scores = score_all(cm, METRICS)
    except ImbalanceToolkitError as e:
        logger.warning(f"{method_id} failed for seed {seed}: {e.name}: {e}")
        return [{'method': method_id, 'seed': seed, 'metric': metric, 'value': None,
                 'reason': f"{e.name}: {e}"} for metric in METRICS]
    return [{'method': method_id, 'seed': seed, 'metric': metric, 'value': value, 'reason': ''}
            for metric, value in scores.items()]


def cmd_compare(args) -> int:
    methods = [m for m in args.methods.split(',') if m]
    if not methods:
        raise InvalidConfig("--methods: need at least one method")
    for method_id in methods:
        method_info(method_id)
    if args.include_baseline:
        methods += [b for b in BASELINES if b not in methods]
    if args.seeds < 1:
        raise InvalidConfig(f"--seeds: need at least 1, got {args.seeds}")

    train = read_dataset_csv(args.train, args.label_column)
    test = _read_like(args.test, train, args.label_column)
    seeds = [args.seed + k for k in range(args.seeds)]

    rows = []
    for method_id in methods:
        for seed in seeds:
            rows.extend(_compare_rows(method_id, seed, train, test, args))
    table = pd.DataFrame(rows, columns=COMPARE_COLUMNS)
    table['value'] = pd.to_numeric(table['value'])
    if table['value'].isna().all():
        raise TrainingError("every method failed; see the warnings above")

    summary = (table.dropna(subset=['value'])
               .groupby(['method', 'metric'], sort=False)['value'].median()
               .reindex(pd.MultiIndex.from_product([methods, list(METRICS)], names=['method', 'metric'])))
    summary_rows = [{'method': m, 'seed': 'median', 'metric': metric, 'value': value,
                     'reason': '' if pd.notna(value) else 'no successful seed'}
                    for (m, metric), value in summary.items()]
    output = pd.concat([table, pd.DataFrame(summary_rows, columns=COMPARE_COLUMNS)], ignore_index=True)
    save_file_atomic(output.to_csv(index=False, float_format='%.17g', na_rep='NA', lineterminator='\n'), args.out)
    for (m, metric), value in summary.items():
        logger.info(f"{m} median {metric}: {value:.4f}" if pd.notna(value) else f"{m} median {metric}: NA")
    return 0


def cmd_visualize(args) -> int:
    model_paths = _parse_named_paths("--model", args.model)
    dataset_paths = _parse_named_paths("--dataset", args.dataset)
    if not model_paths or not dataset_paths:
        raise InvalidConfig("visualize needs at least one --model and one --dataset")
    models = {name: load_model(path) for name, path in model_paths.items()}
    reference = next(iter(models.values()))
    datasets = {name: _read_like(path, reference, args.label_column) for name, path in dataset_paths.items()}
    state = fit_visualizer(models, datasets, granularity=args.granularity, n_jobs=args.jobs)
    write_visualizer_outputs(state, args.out_dir)
    return 0


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("ensemble")
    group.add_argument('--n-estimators', type=int, default=DEFAULT_N_ESTIMATORS, help='Number of members T')
    group.add_argument('--max-depth', type=int, default=None, help='Base tree depth (method default when omitted)')
    group.add_argument('--min-samples-leaf', type=int, default=None)
    group.add_argument('--max-features', type=str, default=None, help='all, sqrt or a count')
    group.add_argument('--balancing-schedule', default='uniform', choices=['uniform', 'progressive'])
    group.add_argument('--target-label', type=int, default=None)
    group.add_argument('--n-target-samples', type=str, default=None, help='N or CLASS:N[,CLASS:N...]')
    group.add_argument('--cost-matrix', type=str, default=None,
                       help='balanced (default), uniform, inverse, log1p-inverse or K*K row-major costs')
    group.add_argument('--eval-metrics', type=str, default=None, help=f'Comma-separated subset of {list(METRICS)}')
    group.add_argument('--train-verbose', type=int, default=0, help='Log every N iterations (0 = off)')
    group.add_argument('--inner-rounds', type=int, default=10, help='Boosting rounds inside easy-ensemble members')
    group.add_argument('--k-neighbors', type=int, default=5)
    group.add_argument('--n-clusters', type=int, default=2)
    group.add_argument('--k-bins', type=int, default=5)
    group.add_argument('--seed', type=int, default=default_seed, help='Master seed (env IMBENS_SEED)')
    group.add_argument('--jobs', type=int, default=default_jobs, help='Worker count (env IMBENS_JOBS)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='imbalance-toolkit',
                                     description='Ensemble learning for class-imbalanced classification')
    subcommands = parser.add_subparsers(dest='command', required=True)

    generate = subcommands.add_parser('generate', help='Generate an imbalanced Gaussian dataset')
    generate.add_argument('--n-samples', type=int, default=200)
    generate.add_argument('--weights', type=str, default='0.9,0.1', help='Comma-separated class proportions')
    generate.add_argument('--n-features', type=int, default=2)
    generate.add_argument('--test-fraction', type=float, default=0.5)
    generate.add_argument('--seed', type=int, default=default_seed)
    generate.add_argument('--train-out', default='train.csv')
    generate.add_argument('--test-out', default='test.csv')
    generate.set_defaults(handler=cmd_generate)

    train = subcommands.add_parser('train', help='Train one method and save the model file')
    train.add_argument('--method', required=True, help=f"One of: {', '.join(METHODS)}")
    train.add_argument('--train', required=True, help='Training CSV')
    train.add_argument('--eval', action='append', help='Evaluation dataset NAME=PATH (repeatable)')
    train.add_argument('--label-column', default=DEFAULT_LABEL_COLUMN)
    train.add_argument('--model-out', default='model.json')
    _add_training_flags(train)
    train.set_defaults(handler=cmd_train)

    evaluate = subcommands.add_parser('evaluate', help='Print balanced accuracy, macro F-score and G-mean')
    evaluate.add_argument('--model', required=True)
    evaluate.add_argument('--test', required=True)
    evaluate.add_argument('--name', default='model')
    evaluate.add_argument('--label-column', default=DEFAULT_LABEL_COLUMN)
    evaluate.set_defaults(handler=cmd_evaluate)

    compare = subcommands.add_parser('compare', help='Compare methods over several seeds')
    compare.add_argument('--methods', required=True, help='Comma-separated method ids')
    compare.add_argument('--train', required=True)
    compare.add_argument('--test', required=True)
    compare.add_argument('--seeds', type=int, default=3, help='Number of master seeds')
    compare.add_argument('--out', default='compare.csv')
    compare.add_argument('--include-baseline', action='store_true',
                         help='Add decision-tree and ada-boost reference rows')
    compare.add_argument('--label-column', default=DEFAULT_LABEL_COLUMN)
    _add_training_flags(compare)
    compare.set_defaults(handler=cmd_compare, method=None)

    visualize = subcommands.add_parser('visualize', help='Write performance curves and confusion heatmaps')
    visualize.add_argument('--model', action='append', help='Model NAME=PATH (repeatable)')
    visualize.add_argument('--dataset', action='append', help='Dataset NAME=PATH (repeatable)')
    visualize.add_argument('--granularity', type=int, default=1)
    visualize.add_argument('--out-dir', default='visualizer')
    visualize.add_argument('--jobs', type=int, default=default_jobs)
    visualize.add_argument('--label-column', default=DEFAULT_LABEL_COLUMN)
    visualize.set_defaults(handler=cmd_visualize)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ImbalanceToolkitError as e:
        logger.error(f"{args.command} failed: {e.name}: {e}")
        print(f"{e.name}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
