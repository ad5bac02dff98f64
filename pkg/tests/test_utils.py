"""
Unit tests for the artifact file utilities.
"""

import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd

from fair_graph_prep.exceptions import DatasetError
from fair_graph_prep.graph_core import CreditGraph, FeatureBlock
from fair_graph_prep.utils.files import (
    atomic_write_text,
    canonical_json,
    config_hash,
    read_csv,
    write_csv,
    write_json,
)
from fair_graph_prep.utils.graph_io import read_graph, write_graph


class TempDirTestCase(unittest.TestCase):
    def setUp(self):
        self._dir = tempfile.TemporaryDirectory()
        self.root = Path(self._dir.name)

    def tearDown(self):
        self._dir.cleanup()


class TestFiles(TempDirTestCase):
    """Test atomic writes, provenance headers and hashing."""

    def test_canonical_json(self):
        """Test that key order does not change the canonical form."""
        self.assertEqual(canonical_json({"b": 1, "a": [1, 2]}), '{"a":[1,2],"b":1}')
        self.assertEqual(config_hash({"b": 1, "a": 2}), config_hash({"a": 2, "b": 1}))
        self.assertNotEqual(config_hash({"a": 1}), config_hash({"a": 2}))

    def test_atomic_write_creates_parents(self):
        path = atomic_write_text(self.root / "deep" / "nested" / "file.txt", "hello")
        self.assertEqual(path.read_text(), "hello")
        self.assertEqual(sorted(p.name for p in path.parent.iterdir()), ["file.txt"])

    def test_atomic_write_keeps_old_file_on_failure(self):
        """Test that a failed write leaves the previous content and no temp file."""
        path = atomic_write_text(self.root / "file.txt", "old")
        failure = OSError("disk full")
        with patch("fair_graph_prep.utils.files.os.replace", side_effect=failure):
            with self.assertRaises(OSError):
                atomic_write_text(path, "new")
        self.assertEqual(path.read_text(), "old")
        self.assertEqual([p.name for p in self.root.iterdir()], ["file.txt"])

    def test_write_json_provenance_first(self):
        path = write_json(self.root / "doc.json", {"value": 1}, {"seed": 3})
        document = json.loads(path.read_text())
        self.assertEqual(list(document), ["provenance", "value"])
        self.assertEqual(document["provenance"], {"seed": 3})

    def test_csv_provenance(self):
        frame = pd.DataFrame({"id": [1, 2], "probability": [0.1, 1 / 3]})
        header = {"config_hash": "abc", "seed": 7}
        path = write_csv(self.root / "table.csv", frame, header)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[:3], ["# config_hash=abc", "# seed=7", "id,probability"])

        provenance, restored = read_csv(path)
        self.assertEqual(provenance, {"config_hash": "abc", "seed": "7"})
        self.assertEqual(restored["probability"].tolist(), [0.1, 1 / 3])

    def test_csv_without_provenance(self):
        path = write_csv(self.root / "plain.csv", pd.DataFrame({"x": [1]}))
        provenance, restored = read_csv(path)
        self.assertEqual(provenance, {})
        self.assertEqual(restored["x"].tolist(), [1])


class TestGraphIO(TempDirTestCase):
    """Test the graph directory format."""

    def make_graph(self):
        features = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 1.0], [1.0, 1.0, 0.0]])
        return CreditGraph(
            features=features,
            sensitive=np.array([0, 1, 0]),
            labels=np.array([1, 0, 1]),
            node_ids=np.array([4, 7, 9]),
            edges=np.array([[4, 7], [7, 9]]),
            feature_names=("Age", "Purpose=car", "Purpose=tv"),
            layout=(
                FeatureBlock("Age", "continuous", 0, 1, raw_min=19.0, raw_max=75.0),
                FeatureBlock("Purpose", "categorical", 1, 3, categories=("car", "tv")),
            ),
            group_names=("Male", "Female"),
        )

    def test_write_read(self):
        graph = self.make_graph()
        write_graph(graph, self.root / "graph", {"method": "original"})
        restored, provenance = read_graph(self.root / "graph")
        self.assertTrue(restored.equals(graph))
        self.assertEqual(restored.layout, graph.layout)
        self.assertEqual(restored.group_names, ("Male", "Female"))
        self.assertEqual(provenance, {"method": "original"})

    def test_no_edges(self):
        graph = self.make_graph().with_edges(np.zeros((0, 2), dtype=np.int64))
        write_graph(graph, self.root / "graph")
        restored, _ = read_graph(self.root / "graph")
        self.assertEqual(restored.num_edges, 0)

    def test_missing_file(self):
        write_graph(self.make_graph(), self.root / "graph")
        (self.root / "graph" / "edges.csv").unlink()
        with self.assertRaises(DatasetError):
            read_graph(self.root / "graph")


if __name__ == "__main__":
    unittest.main()
