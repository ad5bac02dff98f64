"""
Experiment harness.

Runs every configured mitigation method for every repeat (prepare, train,
evaluate), writes the artifacts of each grid cell, aggregates the repeats and
emits reports from the resulting bundle.
"""

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import visual
from .augmenter import AugmentSettings, augment, compute_na
from .config_flow import (
    build_augment_settings,
    build_dataset_schema,
    build_train_config,
)
from .const import (
    AGGREGATED_FILE,
    BUNDLE_FILE,
    CONF_DATASET,
    CONF_EVALUATION,
    CONF_GRAPH,
    CONF_K,
    CONF_METHODS,
    CONF_METRIC,
    CONF_METRICS_ON,
    CONF_OUT_DIR,
    CONF_PATH,
    CONF_REPEATS,
    CONF_SAMPLING,
    CONF_SEED,
    CONF_SPLIT_MODE,
    CONF_TARGET,
    CONF_WORKERS,
    DEFAULT_KNN_K,
    DEFAULT_KNN_METRIC,
    DEFAULT_OUT_DIR,
    DEFAULT_REPEATS,
    DEFAULT_SAMPLING_TARGET,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    DISTRIBUTION_FILE,
    FAIRNESS_METRICS,
    FIGURE_FILE,
    FORMAT_PLOT_DATA,
    FORMAT_RECORDS,
    FORMAT_TABLE,
    GROUP_OVER,
    GROUP_UNDER,
    LABEL_BAD,
    LABEL_GOOD,
    METHOD_AUGMENT,
    METHOD_FEAT_EQUAL,
    METHOD_FEAT_RANDOM,
    METHOD_ORIGINAL,
    METHODS,
    METRICS,
    METRICS_ON_TEST,
    PLOT_DATA_FILE,
    PREDICTIONS_FILE,
    PROVENANCE_FILE,
    RECORDS_FILE,
    REPORT_FILE,
    REPORT_FORMATS,
    SAMPLING_METHODS,
    SPLIT_FALLBACK,
    SPLIT_INDEPENDENT,
    SPLIT_SHARED,
)
from .exceptions import FairGraphError, ReportError
from .fairness_metrics import FairnessReport, aggregate_repeats, evaluate, rank_methods
from .feature_editor import (
    changed_nodes,
    compute_nc,
    compute_nc2,
    reassign_sensitive_and_label,
    reassign_sensitive_random,
)
from .gcn_trainer import NodeSplit, TrainConfig, TrainedModel, split_nodes, train
from .graph_core import (
    BalanceCounts,
    CreditGraph,
    DatasetSchema,
    build_knn_edges,
    group_counts,
    ingest_dataset,
)
from .samplers import SamplingSpec, sparsify
from .utils.files import config_hash, read_json, write_csv, write_json
from .utils.graph_io import write_graph

_LOGGER = logging.getLogger(__name__)

DISTRIBUTION_ROWS = [
    ("group sizes", None),
    ("bad customers", LABEL_BAD),
    ("good customers", LABEL_GOOD),
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run the method x repeat grid."""

    dataset_path: Path
    schema: DatasetSchema
    methods: Tuple[str, ...] = tuple(METHODS)
    knn_k: int = DEFAULT_KNN_K
    knn_metric: str = DEFAULT_KNN_METRIC
    sampling_target: Any = DEFAULT_SAMPLING_TARGET
    training: TrainConfig = field(default_factory=TrainConfig)
    augmentation: AugmentSettings = field(default_factory=AugmentSettings)
    repeats: int = DEFAULT_REPEATS
    seed: int = DEFAULT_SEED
    out_dir: Path = Path(DEFAULT_OUT_DIR)
    metrics_on: str = METRICS_ON_TEST
    split_mode: str = SPLIT_SHARED
    workers: int = DEFAULT_WORKERS
    config_hash: str = ""

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise FairGraphError(f"repeats must be at least 1, got {self.repeats}")
        if not self.methods:
            raise FairGraphError("At least one method is required")
        unknown = [method for method in self.methods if method not in METHODS]
        if unknown:
            raise FairGraphError(f"Unknown method(s): {', '.join(unknown)}")

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from a validated config mapping (see ``config_flow``)."""
        return cls(
            dataset_path=Path(config[CONF_DATASET][CONF_PATH]),
            schema=build_dataset_schema(config),
            methods=tuple(config[CONF_METHODS]),
            knn_k=config[CONF_GRAPH][CONF_K],
            knn_metric=config[CONF_GRAPH][CONF_METRIC],
            sampling_target=config[CONF_SAMPLING][CONF_TARGET],
            training=build_train_config(config, config[CONF_SEED]),
            augmentation=build_augment_settings(config),
            repeats=config[CONF_REPEATS],
            seed=config[CONF_SEED],
            out_dir=Path(config[CONF_OUT_DIR]),
            metrics_on=config[CONF_EVALUATION][CONF_METRICS_ON],
            split_mode=config[CONF_EVALUATION][CONF_SPLIT_MODE],
            workers=config[CONF_WORKERS],
            config_hash=config_hash(config),
        )

    def repeat_seed(self, repeat: int) -> int:
        return self.seed + repeat

    def split_seed(self, method: str, repeat: int) -> int:
        """Shared mode: every method of a repeat uses the repeat seed."""
        if self.split_mode == SPLIT_INDEPENDENT:
            entropy = [self.seed, repeat, METHODS.index(method)]
            sequence = np.random.SeedSequence(entropy)
            return int(sequence.generate_state(1)[0])
        return self.repeat_seed(repeat)

    def provenance(self, seed: int, **extra) -> Dict[str, Any]:
        return {"config_hash": self.config_hash, "seed": seed, **extra}


@dataclass(frozen=True)
class PreparedDataset:
    """A prepared graph plus the record of how it was produced."""

    graph: CreditGraph
    method: str
    seed: int
    provenance: Mapping[str, Any]


def prepare_method(
    graph: CreditGraph, method: str, seed: int, config: ExperimentConfig
) -> PreparedDataset:
    """Apply one mitigation method to ``graph``."""
    before = group_counts(graph)
    details: Dict[str, Any] = {}
    if method == METHOD_ORIGINAL:
        result = graph
    elif method in SAMPLING_METHODS:
        spec = SamplingSpec(method, seed, config.sampling_target)
        result = sparsify(graph, spec)
        details["target"] = spec.target
    elif method == METHOD_FEAT_RANDOM:
        details["NC"] = compute_nc(before)
        result = reassign_sensitive_random(graph, seed)
        details["changed"] = changed_nodes(graph, result)
    elif method == METHOD_FEAT_EQUAL:
        details["NC2"] = compute_nc2(before)
        result = reassign_sensitive_and_label(graph, seed)
        details["changed"] = changed_nodes(graph, result)
    elif method == METHOD_AUGMENT:
        details["NA"] = compute_na(before)
        result, record = augment(graph, config.augmentation, seed)
        details.update(record)
    else:
        raise FairGraphError(f"Unknown method {method!r}")

    provenance = {
        "method": method,
        "seed": seed,
        "counts_before": before.to_dict(),
        "counts_after": group_counts(result).to_dict(),
        **details,
    }
    _LOGGER.info("Prepared %s (seed %d): %d nodes", method, seed, result.num_nodes)
    return PreparedDataset(result, method, seed, provenance)


def predictions_frame(graph: CreditGraph, trained: TrainedModel) -> pd.DataFrame:
    """One row per node: id, true and predicted label, P(good), group, split."""
    split = np.full(graph.num_nodes, "", dtype=object)
    split[graph.positions(trained.split.train)] = "train"
    split[graph.positions(trained.split.test)] = "test"
    return pd.DataFrame(
        {
            "id": graph.node_ids,
            "label": graph.labels.astype(np.int64),
            "predicted": trained.predictions.astype(np.int64),
            "probability": trained.positive_probability,
            "group": graph.sensitive.astype(np.int64),
            "split": split,
        }
    )


def evaluate_predictions(
    frame: pd.DataFrame, metrics_on: str, group_names: Sequence[str]
) -> FairnessReport:
    """Fairness report over test rows (or every row) of a predictions table."""
    if metrics_on == METRICS_ON_TEST:
        frame = frame[frame["split"] == "test"]
    return evaluate(frame["predicted"], frame["label"], frame["group"], group_names)


@dataclass
class CellResult:
    """Outcome of one (method, repeat) grid cell."""

    method: str
    repeat: int
    seed: int
    counts: Optional[BalanceCounts] = None
    report: Optional[FairnessReport] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "repeat": self.repeat,
            "seed": self.seed,
            "counts": self.counts.to_dict() if self.counts else None,
            "report": self.report.to_dict() if self.report else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CellResult":
        counts = data.get("counts")
        report = data.get("report")
        return cls(
            method=data["method"],
            repeat=data["repeat"],
            seed=data["seed"],
            counts=_counts_from_dict(counts) if counts else None,
            report=FairnessReport.from_dict(report) if report else None,
            error=data.get("error"),
        )


def _counts_from_dict(data: Mapping[str, Any]) -> BalanceCounts:
    cells = {}
    for key, value in data["cells"].items():
        group, label = key.split("/")
        cells[(int(group), int(label))] = value
    return BalanceCounts.from_cells(cells)


@dataclass
class ExperimentBundle:
    """Grid results, per-method aggregates and the distribution table."""

    config_hash: str
    seed: int
    repeats: int
    methods: List[str]
    group_names: Tuple[str, str]
    cells: List[CellResult]
    aggregated: Dict[str, FairnessReport] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return any(not cell.ok for cell in self.cells)

    @property
    def failures(self) -> List[CellResult]:
        return [cell for cell in self.cells if not cell.ok]

    def distribution(self) -> Dict[str, BalanceCounts]:
        """Counts of the first successful repeat of every method."""
        counts = {}
        for cell in self.cells:
            if cell.ok and cell.method not in counts:
                counts[cell.method] = cell.counts
        return counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "repeats": self.repeats,
            "methods": list(self.methods),
            "group_names": list(self.group_names),
            "partial": self.partial,
            "cells": [cell.to_dict() for cell in self.cells],
            "aggregated": {
                name: report.to_dict() for name, report in self.aggregated.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentBundle":
        return cls(
            config_hash=data["config_hash"],
            seed=data["seed"],
            repeats=data["repeats"],
            methods=list(data["methods"]),
            group_names=tuple(data["group_names"]),
            cells=[CellResult.from_dict(cell) for cell in data["cells"]],
            aggregated={
                name: FairnessReport.from_dict(report)
                for name, report in data.get("aggregated", {}).items()
            },
        )


def load_bundle(directory) -> ExperimentBundle:
    """Read the bundle that :func:`run_experiment` saved in ``directory``."""
    path = Path(directory) / BUNDLE_FILE
    if not path.is_file():
        raise ReportError(f"No experiment bundle at {path}")
    return ExperimentBundle.from_dict(read_json(path))


def cell_directory(out_dir: Path, method: str, repeat: int) -> Path:
    """Output directory of one (method, repeat) grid cell."""
    return out_dir / method / f"repeat-{repeat}"


def load_graph(config: ExperimentConfig) -> CreditGraph:
    """Ingest the configured dataset and connect it with kNN edges."""
    graph = ingest_dataset(config.dataset_path, config.schema)
    return graph.with_edges(build_knn_edges(graph, config.knn_k, config.knn_metric))


def run_cell(
    graph: CreditGraph, config: ExperimentConfig, method: str, repeat: int
) -> CellResult:
    """Prepare, train and evaluate one grid cell and write its artifacts.

    Any error is recorded on the result instead of propagating.
    """
    seed = config.repeat_seed(repeat)
    directory = cell_directory(config.out_dir, method, repeat)
    header = config.provenance(seed, method=method, repeat=repeat)
    try:
        prepared = prepare_method(graph, method, seed, config)
        split: NodeSplit = split_nodes(
            prepared.graph,
            config.training.train_fraction,
            config.split_seed(method, repeat),
        )
        training = dataclasses.replace(config.training, seed=seed)
        trained = train(prepared.graph, training, split)
        frame = predictions_frame(prepared.graph, trained)
        report = evaluate_predictions(
            frame, config.metrics_on, prepared.graph.group_names
        )

        fallback = split.fallback_record()
        write_graph(prepared.graph, directory, header)
        write_json(
            directory / PROVENANCE_FILE,
            {**prepared.provenance, SPLIT_FALLBACK: fallback},
            header,
        )
        write_csv(
            directory / PREDICTIONS_FILE, frame, {**header, SPLIT_FALLBACK: fallback}
        )
        write_json(directory / REPORT_FILE, report.to_dict(), header)
    except Exception as err:  # noqa: BLE001
        _LOGGER.warning("Cell %s/repeat %d failed: %s", method, repeat, err)
        return CellResult(method, repeat, seed, error=f"{type(err).__name__}: {err}")

    _LOGGER.debug("Finished cell %s/repeat %d", method, repeat)
    return CellResult(method, repeat, seed, group_counts(prepared.graph), report)


def run_experiment(config: ExperimentConfig) -> ExperimentBundle:
    """
    Run the method x repeat grid and write the bundle.

    Repeat ``r`` of every method uses seed ``config.seed + r``. With
    ``workers > 1`` cells run on a thread pool; results keep grid order.

    Returns:
        Bundle with one entry per cell and per-method aggregates
    """
    graph = load_graph(config)
    grid = [
        (method, repeat)
        for method in config.methods
        for repeat in range(config.repeats)
    ]
    _LOGGER.info(
        "Running %d methods x %d repeats (config %s)",
        len(config.methods),
        config.repeats,
        config.config_hash[:12],
    )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(lambda cell: run_cell(graph, config, *cell), grid))
    else:
        cells = [run_cell(graph, config, method, repeat) for method, repeat in grid]

    aggregated = {}
    for method in config.methods:
        reports = [cell.report for cell in cells if cell.method == method and cell.ok]
        if reports:
            aggregated[method] = aggregate_repeats(reports)

    bundle = ExperimentBundle(
        config_hash=config.config_hash,
        seed=config.seed,
        repeats=config.repeats,
        methods=list(config.methods),
        group_names=graph.group_names,
        cells=cells,
        aggregated=aggregated,
    )
    header = config.provenance(config.seed)
    write_json(config.out_dir / BUNDLE_FILE, bundle.to_dict(), header)
    write_json(
        config.out_dir / AGGREGATED_FILE,
        {name: report.to_dict() for name, report in aggregated.items()},
        header,
    )
    write_csv(config.out_dir / DISTRIBUTION_FILE, distribution_table(bundle), header)

    if bundle.partial:
        _LOGGER.warning("%d of %d cells failed", len(bundle.failures), len(cells))
    _LOGGER.info("Experiment finished; results in %s", config.out_dir)
    return bundle


def distribution_table(bundle: ExperimentBundle) -> pd.DataFrame:
    """Group sizes, bad and good counts per method as ``over / under`` cells."""
    over_name, under_name = bundle.group_names
    distribution = bundle.distribution()
    table = {
        "row": [f"{name} ({over_name} / {under_name})" for name, _ in DISTRIBUTION_ROWS]
    }
    for method in bundle.methods:
        if method not in distribution:
            continue
        counts = distribution[method]
        column = []
        for _, label in DISTRIBUTION_ROWS:
            if label is None:
                column.append(f"{counts.over} / {counts.under}")
            else:
                column.append(
                    f"{counts.cell(GROUP_OVER, label)} / "
                    f"{counts.cell(GROUP_UNDER, label)}"
                )
        table[method] = column
    return pd.DataFrame(table)


def plot_data(bundle: ExperimentBundle) -> pd.DataFrame:
    """One row per (method, metric): group values, delta and their spreads."""
    rows = []
    for method in bundle.methods:
        report = bundle.aggregated.get(method)
        if report is None:
            continue
        for metric in METRICS:
            summary = report[metric]
            rows.append(
                {
                    "method": method,
                    "metric": metric,
                    "group_a": summary.group_a,
                    "group_b": summary.group_b,
                    "delta": summary.delta,
                    "group_a_std": summary.group_a_std,
                    "group_b_std": summary.group_b_std,
                    "delta_std": summary.delta_std,
                    "runs": summary.runs,
                }
            )
    return pd.DataFrame(rows)


def emit_report(bundle: ExperimentBundle, fmt: str, out_dir) -> List[Path]:
    """
    Write report files for ``bundle`` in one format.

    Args:
        bundle: Results of :func:`run_experiment`
        fmt: ``records``, ``table``, ``plot-data`` or ``svg``
        out_dir: Destination directory

    Returns:
        Paths of the written files
    """
    if fmt not in REPORT_FORMATS:
        raise ReportError(
            f"Unknown report format {fmt!r}; expected one of {REPORT_FORMATS}"
        )
    if not bundle.cells or not bundle.aggregated:
        raise ReportError("Experiment bundle has no completed runs")

    out_dir = Path(out_dir)
    header = {"config_hash": bundle.config_hash, "seed": bundle.seed}
    if fmt == FORMAT_RECORDS:
        records = {
            "records": plot_data(bundle).to_dict(orient="records"),
            "accuracy": {
                method: {
                    "overall": report.overall_accuracy,
                    "overall_std": report.overall_accuracy_std,
                }
                for method, report in bundle.aggregated.items()
            },
            "ranking": {
                metric: [
                    {"method": method, "delta": delta}
                    for method, delta in rank_methods(bundle.aggregated, metric)
                ]
                for metric in FAIRNESS_METRICS
            },
            "failures": [cell.to_dict() for cell in bundle.failures],
        }
        paths = [write_json(out_dir / RECORDS_FILE, records, header)]
    elif fmt == FORMAT_TABLE:
        table = distribution_table(bundle)
        paths = [write_csv(out_dir / DISTRIBUTION_FILE, table, header)]
    elif fmt == FORMAT_PLOT_DATA:
        paths = [write_csv(out_dir / PLOT_DATA_FILE, plot_data(bundle), header)]
    else:
        frame = plot_data(bundle)
        svg = visual.render_fairness_figure(frame, bundle.group_names, header)
        paths = [
            write_csv(out_dir / PLOT_DATA_FILE, frame, header),
            visual.write_svg(out_dir / FIGURE_FILE, svg),
        ]
    _LOGGER.info("Wrote %s report: %s", fmt, ", ".join(str(path) for path in paths))
    return paths
