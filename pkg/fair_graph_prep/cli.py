"""
Command-line entry point.

Stages chain through files: ``ingest`` writes a graph, ``prepare`` reads it
and writes a prepared graph, ``train`` writes predictions and ``evaluate``
turns predictions into a fairness report. ``run-experiment`` runs the full
grid and ``report`` emits reports from a saved bundle.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import cli_harness
from .config_flow import load_config
from .const import (
    CONF_OUT_DIR,
    CONF_REPEATS,
    CONF_SEED,
    META_FILE,
    METHODS,
    PREDICTIONS_FILE,
    PROVENANCE_FILE,
    REPORT_FILE,
    REPORT_FORMATS,
)
from .exceptions import FairGraphError
from .gcn_trainer import split_nodes, train
from .utils.files import read_csv, read_json, write_csv, write_json
from .utils.graph_io import read_graph, write_graph

_LOGGER = logging.getLogger(__name__)

GRAPH_DIR = "graph"
PREPARED_DIR = "prepared"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fair_graph_prep",
        description="Prepare credit graphs for fair learning and measure GCN fairness",
    )
    parser.add_argument(
        "--config", default="config.yaml", help="YAML experiment config"
    )
    parser.add_argument("--out-dir", help="Output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="Base seed (overrides the config)")
    parser.add_argument(
        "--repeats", type=int, help="Repeats per method (overrides the config)"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("ingest", help="Ingest the dataset and build kNN edges")

    prepare = commands.add_parser("prepare", help="Apply one mitigation method")
    prepare.add_argument("--method", required=True, choices=METHODS)
    prepare.add_argument("--graph", help="Graph directory (default: <out-dir>/graph)")
    prepare.add_argument("--gmm-k", type=int, help="Mixture components for augment")
    prepare.add_argument("--latent", type=int, help="Latent size for augment")

    train_cmd = commands.add_parser("train", help="Train the GCN and write predictions")
    train_cmd.add_argument(
        "--graph", help="Graph directory (default: <out-dir>/prepared)"
    )

    evaluate = commands.add_parser("evaluate", help="Compute fairness metrics")
    evaluate.add_argument("--predictions", required=True, help="Predictions CSV")

    commands.add_parser("run-experiment", help="Run the full method x repeat grid")

    report = commands.add_parser("report", help="Emit reports from a saved bundle")
    report.add_argument("--format", required=True, choices=REPORT_FORMATS)
    report.add_argument("--bundle", help="Bundle directory (default: <out-dir>)")
    return parser


def _experiment(args: argparse.Namespace) -> cli_harness.ExperimentConfig:
    overrides = {
        CONF_OUT_DIR: args.out_dir,
        CONF_SEED: args.seed,
        CONF_REPEATS: args.repeats,
    }
    return cli_harness.ExperimentConfig.from_config(load_config(args.config, overrides))


def _ingest(args: argparse.Namespace) -> None:
    config = _experiment(args)
    graph = cli_harness.load_graph(config)
    write_graph(graph, config.out_dir / GRAPH_DIR, config.provenance(config.seed))


def _prepare(args: argparse.Namespace) -> None:
    config = _experiment(args)
    augmentation = config.augmentation
    if args.gmm_k is not None:
        augmentation = dataclasses.replace(augmentation, gmm_components=args.gmm_k)
    if args.latent is not None:
        augmentation = dataclasses.replace(augmentation, latent=args.latent)
    config = dataclasses.replace(config, augmentation=augmentation)

    graph, _ = read_graph(args.graph or config.out_dir / GRAPH_DIR)
    prepared = cli_harness.prepare_method(graph, args.method, config.seed, config)
    directory = config.out_dir / PREPARED_DIR
    header = config.provenance(config.seed, method=args.method)
    write_graph(prepared.graph, directory, header)
    write_json(directory / PROVENANCE_FILE, dict(prepared.provenance), header)


def _train(args: argparse.Namespace) -> None:
    config = _experiment(args)
    directory = Path(args.graph) if args.graph else config.out_dir / PREPARED_DIR
    graph, provenance = read_graph(directory)
    split = split_nodes(graph, config.training.train_fraction, config.seed)
    trained = train(graph, config.training, split)
    header = config.provenance(
        config.seed,
        method=provenance.get("method", "unknown"),
        split_fallback=split.fallback_record(),
    )
    write_csv(
        directory / PREDICTIONS_FILE,
        cli_harness.predictions_frame(graph, trained),
        header,
    )


def _evaluate(args: argparse.Namespace) -> None:
    config = _experiment(args)
    path = Path(args.predictions)
    provenance, frame = read_csv(path)
    meta = path.parent / META_FILE
    group_names = read_json(meta)["group_names"] if meta.is_file() else ("A", "B")
    report = cli_harness.evaluate_predictions(frame, config.metrics_on, group_names)
    write_json(path.parent / REPORT_FILE, report.to_dict(), provenance)


def _run_experiment(args: argparse.Namespace) -> None:
    bundle = cli_harness.run_experiment(_experiment(args))
    if bundle.partial:
        raise FairGraphError(f"{len(bundle.failures)} grid cell(s) failed; see bundle")


def _report(args: argparse.Namespace) -> None:
    if args.bundle:
        directory = Path(args.bundle)
    else:
        directory = _experiment(args).out_dir
    bundle = cli_harness.load_bundle(directory)
    cli_harness.emit_report(bundle, args.format, directory)


COMMANDS = {
    "ingest": _ingest,
    "prepare": _prepare,
    "train": _train,
    "evaluate": _evaluate,
    "run-experiment": _run_experiment,
    "report": _report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI; returns 0 on success and 1 on a domain error."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except FairGraphError as err:
        _LOGGER.error("%s", err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
