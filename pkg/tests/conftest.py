"""
Shared fixtures: synthetic credit files and small hand-built graphs.
"""

from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pandas as pd
import pytest

from fair_graph_prep.graph_core import CreditGraph, DatasetSchema, ingest_dataset

REAL_GERMAN = Path(__file__).resolve().parent.parent / "data" / "german.csv"

# (gender, good customer) -> rows, matching the german credit data
GERMAN_CELLS = {
    ("Male", False): 191,
    ("Male", True): 499,
    ("Female", False): 109,
    ("Female", True): 201,
}

SMALL_CELLS = {
    ("Male", False): 8,
    ("Male", True): 20,
    ("Female", False): 4,
    ("Female", True): 8,
}

PURPOSES = ["business", "car", "education", "furniture"]
DURATIONS = [6, 12, 18, 24, 36, 48]


def write_credit_csv(
    path: Path, cells: Dict[Tuple[str, bool], int], seed: int = 0
) -> Path:
    """Write a german-shaped credit file with exactly ``cells`` rows per cell."""
    rng = np.random.default_rng(seed)
    rows = []
    for (gender, good), count in cells.items():
        for _ in range(count):
            rows.append(
                {
                    "Gender": gender,
                    "Age": int(rng.integers(19, 76)),
                    "LoanAmount": int(rng.integers(250, 18001)),
                    "LoanDuration": int(rng.choice(DURATIONS)),
                    "PurposeOfLoan": str(rng.choice(PURPOSES)),
                    "Single": int(rng.integers(0, 2)),
                    "GoodCustomer": 1 if good else -1,
                }
            )
    order = rng.permutation(len(rows))
    pd.DataFrame([rows[i] for i in order]).to_csv(path, index=False)
    return path


def credit_schema(**changes) -> DatasetSchema:
    values = dict(
        columns={
            "Gender": "sensitive",
            "GoodCustomer": "label",
            "PurposeOfLoan": "feature-categorical",
        },
        good_value="1",
        default_role="feature-continuous",
    )
    values.update(changes)
    return DatasetSchema(**values)


@pytest.fixture
def german_csv(tmp_path) -> Path:
    return write_credit_csv(tmp_path / "german.csv", GERMAN_CELLS)


@pytest.fixture
def german_graph(german_csv) -> CreditGraph:
    return ingest_dataset(german_csv, credit_schema())


@pytest.fixture
def small_csv(tmp_path) -> Path:
    return write_credit_csv(tmp_path / "small.csv", SMALL_CELLS)


@pytest.fixture
def small_graph(small_csv) -> CreditGraph:
    return ingest_dataset(small_csv, credit_schema())


@pytest.fixture
def real_german_graph() -> CreditGraph:
    if not REAL_GERMAN.is_file():
        pytest.skip("data/german.csv not available")
    schema = credit_schema(guarded_columns=("LoanAmount", "Age"))
    return ingest_dataset(REAL_GERMAN, schema)


@pytest.fixture
def make_graph():
    """Factory for graphs from tags and labels, with random features by default."""

    def _make(sensitive, labels, features=None, edges=(), node_ids=None, seed=0):
        sensitive = np.asarray(sensitive)
        if features is None:
            features = np.random.default_rng(seed).random((len(sensitive), 3))
        if node_ids is None:
            node_ids = np.arange(len(sensitive))
        return CreditGraph(
            features=features,
            sensitive=sensitive,
            labels=np.asarray(labels),
            node_ids=node_ids,
            edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        )

    return _make
