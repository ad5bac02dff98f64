"""
Tests for the experiment harness: grid runs, artifacts and reports.
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from fair_graph_prep.cli_harness import (
    ExperimentBundle,
    ExperimentConfig,
    distribution_table,
    emit_report,
    load_bundle,
    load_graph,
    plot_data,
    prepare_method,
    run_experiment,
)
from fair_graph_prep.config_flow import validate_config
from fair_graph_prep.const import FAIRNESS_METRICS, FORMAT_SVG, METHODS, METRICS
from fair_graph_prep.exceptions import FairGraphError, ReportError
from fair_graph_prep.utils.files import read_csv, read_json

from conftest import SMALL_CELLS, write_credit_csv


def experiment_config(csv_path, out_dir, cls=ExperimentConfig, **changes):
    data = {
        "dataset": {
            "path": str(csv_path),
            "schema": {
                "columns": {
                    "Gender": "sensitive",
                    "GoodCustomer": "label",
                    "PurposeOfLoan": "feature-categorical",
                },
                "default_role": "feature-continuous",
                "good_value": "1",
            },
        },
        "graph": {"k": 3},
        "training": {"epochs": 5, "hidden": [8, 4]},
        "augmentation": {
            "epochs": 20,
            "hidden": 8,
            "latent": 2,
            "gmm_components": 2,
            "attach_k": 3,
            "label_neighbors": 3,
        },
        "repeats": 2,
        "seed": 0,
        "out_dir": str(out_dir),
    }
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return cls.from_config(validate_config(data))


def snapshot(directory: Path):
    return {
        str(path.relative_to(directory)): path.read_bytes()
        for path in sorted(directory.rglob("*"))
        if path.is_file()
    }


class FixedSeedConfig(ExperimentConfig):
    """Every repeat reuses the base seed."""

    def repeat_seed(self, repeat):
        return self.seed


class TestExperimentConfig:
    def test_from_config(self, small_csv, tmp_path):
        config = experiment_config(small_csv, tmp_path)
        assert config.methods == tuple(METHODS)
        assert config.knn_k == 3
        assert config.training.hidden == (8, 4)
        assert len(config.config_hash) == 64

    def test_repeat_seeds(self, small_csv, tmp_path):
        config = experiment_config(small_csv, tmp_path, seed=5)
        assert [config.repeat_seed(r) for r in range(3)] == [5, 6, 7]
        assert config.split_seed("random", 1) == config.split_seed("augment", 1) == 6

    def test_independent_splits(self, small_csv, tmp_path):
        config = experiment_config(
            small_csv, tmp_path, evaluation={"split_mode": "independent"}
        )
        assert config.split_seed("random", 0) != config.split_seed("augment", 0)
        assert config.split_seed("random", 0) == config.split_seed("random", 0)

    def test_defaults_match_config_defaults(self, small_csv):
        schema = {
            "columns": {"Gender": "sensitive", "GoodCustomer": "label"},
            "good_value": "1",
        }
        data = {"dataset": {"path": str(small_csv), "schema": schema}}
        from_file = ExperimentConfig.from_config(validate_config(data))
        bare = ExperimentConfig(from_file.dataset_path, from_file.schema)
        for name in (
            "methods",
            "knn_k",
            "knn_metric",
            "sampling_target",
            "repeats",
            "seed",
            "out_dir",
            "metrics_on",
            "split_mode",
            "workers",
        ):
            assert getattr(bare, name) == getattr(from_file, name), name

    def test_rejects_unknown_method(self, small_csv, tmp_path):
        config = experiment_config(small_csv, tmp_path)
        with pytest.raises(FairGraphError):
            ExperimentConfig(config.dataset_path, config.schema, methods=("cluster",))
        with pytest.raises(FairGraphError):
            ExperimentConfig(config.dataset_path, config.schema, repeats=0)


class TestPrepareMethod:
    """Provenance of a single prepared dataset."""

    @pytest.fixture
    def setup(self, small_csv, tmp_path):
        config = experiment_config(small_csv, tmp_path)
        return load_graph(config), config

    def test_original(self, setup):
        graph, config = setup
        prepared = prepare_method(graph, "original", 0, config)
        assert prepared.graph is graph
        provenance = prepared.provenance
        assert provenance["counts_before"] == provenance["counts_after"]
        assert prepared.provenance["counts_after"]["X"] == 40

    def test_feat_random(self, setup):
        graph, config = setup
        prepared = prepare_method(graph, "feat-random", 1, config)
        assert prepared.provenance["NC"] == 8
        assert len(prepared.provenance["changed"]["sensitive"]) == 8
        assert prepared.provenance["counts_after"]["O"] == 20

    def test_feat_equal(self, setup):
        graph, config = setup
        prepared = prepare_method(graph, "feat-equal", 0, config)
        assert prepared.provenance["NC2"] == 20
        assert set(prepared.provenance["counts_after"]["cells"].values()) == {10}

    def test_sampling(self, setup):
        graph, config = setup
        prepared = prepare_method(graph, "stratified", 0, config)
        assert prepared.provenance["target"] == "balance"
        assert prepared.provenance["counts_after"]["cells"] == {
            "0/0": 4,
            "0/1": 8,
            "1/0": 4,
            "1/1": 8,
        }

    def test_augment(self, setup):
        graph, config = setup
        prepared = prepare_method(graph, "augment", 0, config)
        assert prepared.provenance["NA"] == 16
        assert prepared.provenance["counts_after"]["U"] == 28
        assert graph.num_nodes == 40


class TestRunExperiment:
    """The method x repeat grid."""

    def test_full_grid(self, small_csv, tmp_path):
        out = tmp_path / "results"
        bundle = run_experiment(experiment_config(small_csv, out))

        assert not bundle.partial
        assert len(bundle.cells) == 14
        assert len(list(out.glob("*/repeat-*/predictions.csv"))) == 14
        assert sorted(bundle.aggregated) == sorted(METHODS)
        aggregated = read_json(out / "aggregated.json")
        assert set(aggregated) - {"provenance"} == set(METHODS)
        for method in METHODS:
            assert bundle.aggregated[method].runs == 2

        provenance, predictions = read_csv(
            out / "random" / "repeat-1" / "predictions.csv"
        )
        assert provenance["seed"] == "1"
        assert provenance["method"] == "random"
        assert set(predictions["split"]) == {"train", "test"}
        text = (out / "original" / "repeat-0" / "predictions.csv").read_text()
        first_line = text.splitlines()[0]
        assert first_line.startswith("# config_hash=")

    def test_rerun_byte_identical(self, small_csv, tmp_path):
        out = tmp_path / "results"
        config = experiment_config(
            small_csv, out, methods=["original", "weighted", "feat-equal"]
        )
        run_experiment(config)
        first = snapshot(out)
        run_experiment(config)
        assert snapshot(out) == first

    def test_workers_match_serial(self, small_csv, tmp_path):
        methods = ["original", "stratified", "feat-random"]
        serial = run_experiment(
            experiment_config(small_csv, tmp_path / "serial", methods=methods)
        )
        pooled = run_experiment(
            experiment_config(
                small_csv, tmp_path / "pooled", methods=methods, workers=2
            )
        )
        assert [(c.method, c.repeat) for c in pooled.cells] == [
            (c.method, c.repeat) for c in serial.cells
        ]
        for method in methods:
            expected = serial.aggregated[method].to_dict()
            assert pooled.aggregated[method].to_dict() == expected

    def test_failing_cell_isolated(self, small_csv, tmp_path):
        out = tmp_path / "results"
        config = experiment_config(
            small_csv,
            out,
            methods=["original", "augment"],
            repeats=1,
            augmentation={"latent": 50},
        )
        bundle = run_experiment(config)

        assert bundle.partial
        assert [cell.method for cell in bundle.failures] == ["augment"]
        assert bundle.failures[0].error.startswith("TrainingError")
        assert list(bundle.aggregated) == ["original"]
        assert (out / "bundle.json").is_file()
        assert json.loads((out / "bundle.json").read_text())["partial"] is True

    def test_equal_seeds_zero_spread(self, small_csv, tmp_path):
        config = experiment_config(
            small_csv,
            tmp_path,
            cls=FixedSeedConfig,
            methods=["original", "stratified"],
            repeats=3,
        )
        bundle = run_experiment(config)
        for report in bundle.aggregated.values():
            assert report.overall_accuracy_std == pytest.approx(0.0, abs=1e-12)
            for metric in METRICS:
                assert report[metric].delta_std == pytest.approx(0.0, abs=1e-12)

    def test_distribution_of_original(self, small_csv, tmp_path):
        bundle = run_experiment(
            experiment_config(small_csv, tmp_path, methods=["original"], repeats=1)
        )
        table = distribution_table(bundle)
        assert list(table["row"]) == [
            "group sizes (Male / Female)",
            "bad customers (Male / Female)",
            "good customers (Male / Female)",
        ]
        assert list(table["original"]) == ["28 / 12", "8 / 4", "20 / 8"]

    def test_split_fallback_recorded(self, tmp_path):
        cells = {
            ("Male", False): 8,
            ("Male", True): 12,
            ("Female", False): 1,
            ("Female", True): 6,
        }
        csv_path = write_credit_csv(tmp_path / "tiny.csv", cells)
        out = tmp_path / "results"
        bundle = run_experiment(
            experiment_config(csv_path, out, methods=["original"], repeats=1)
        )

        assert not bundle.partial
        directory = out / "original" / "repeat-0"
        assert read_json(directory / "provenance.json")["split_fallback"] == [[1, 0]]
        provenance, _ = read_csv(directory / "predictions.csv")
        assert provenance["split_fallback"] == "[[1, 0]]"

    def test_split_fallback_empty_when_stratified(self, small_csv, tmp_path):
        config = experiment_config(small_csv, tmp_path, methods=["original"], repeats=1)
        run_experiment(config)
        provenance = read_json(tmp_path / "original" / "repeat-0" / "provenance.json")
        assert provenance["split_fallback"] == []


class TestReports:
    """Report formats emitted from a bundle."""

    @pytest.fixture(scope="class")
    def bundle_dir(self, tmp_path_factory):
        root = tmp_path_factory.mktemp("reports")
        csv_path = write_credit_csv(root / "small.csv", SMALL_CELLS)
        out = root / "results"
        run_experiment(
            experiment_config(
                csv_path, out, methods=["original", "stratified", "feat-equal"]
            )
        )
        return out

    def test_load_bundle(self, bundle_dir):
        bundle = load_bundle(bundle_dir)
        assert bundle.methods == ["original", "stratified", "feat-equal"]
        assert bundle.group_names == ("Male", "Female")
        restored = ExperimentBundle.from_dict(bundle.to_dict())
        assert restored.to_dict() == bundle.to_dict()

    def test_missing_bundle(self, tmp_path):
        with pytest.raises(ReportError):
            load_bundle(tmp_path)

    def test_records(self, bundle_dir, tmp_path):
        (path,) = emit_report(load_bundle(bundle_dir), "records", tmp_path)
        records = read_json(path)
        assert len(records["records"]) == 3 * len(METRICS)
        assert sorted(records["ranking"]) == sorted(FAIRNESS_METRICS)
        assert records["failures"] == []
        expected_hash = load_bundle(bundle_dir).config_hash
        assert records["provenance"]["config_hash"] == expected_hash

    def test_table(self, bundle_dir, tmp_path):
        (path,) = emit_report(load_bundle(bundle_dir), "table", tmp_path)
        _, table = read_csv(path)
        assert list(table.columns) == ["row", "original", "stratified", "feat-equal"]
        assert table["stratified"].tolist()[0] == "12 / 12"
        assert table["feat-equal"].tolist()[0] == "20 / 20"

    def test_plot_data(self, bundle_dir, tmp_path):
        bundle = load_bundle(bundle_dir)
        (path,) = emit_report(bundle, "plot-data", tmp_path)
        _, frame = read_csv(path)
        expected = plot_data(bundle)
        assert list(frame["method"]) == list(expected["method"])
        pd.testing.assert_series_equal(
            frame["delta"], expected["delta"], check_dtype=False
        )

    def test_svg(self, bundle_dir, tmp_path):
        paths = emit_report(load_bundle(bundle_dir), FORMAT_SVG, tmp_path)
        assert [path.name for path in paths] == ["plot_data.csv", "fairness.svg"]
        svg = paths[1].read_text()
        assert "<svg" in svg
        assert "config_hash" in svg

    def test_unknown_format(self, bundle_dir, tmp_path):
        with pytest.raises(ReportError):
            emit_report(load_bundle(bundle_dir), "pdf", tmp_path)

    def test_empty_bundle(self, tmp_path):
        bundle = ExperimentBundle("abc", 0, 1, ["original"], ("A", "B"), cells=[])
        with pytest.raises(ReportError):
            emit_report(bundle, "table", tmp_path)
