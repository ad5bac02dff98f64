"""
Graph data model for credit datasets.

Owns ingestion of a tabular file into a :class:`CreditGraph`, kNN edge
construction, induced subgraphs and the group/label bookkeeping
(:class:`BalanceCounts`) that every mitigation method relies on.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from sklearn.preprocessing import MinMaxScaler

from .const import (
    BLOCK_CATEGORICAL,
    BLOCK_CONTINUOUS,
    BLOCK_SENSITIVE,
    DEFAULT_GROUP_NAMES,
    DEFAULT_KNN_K,
    DEFAULT_KNN_METRIC,
    GROUP_OVER,
    GROUP_UNDER,
    GROUPS,
    KNN_METRICS,
    LABEL_BAD,
    LABEL_GOOD,
    LABELS,
    ROLE_CATEGORICAL,
    ROLE_CONTINUOUS,
    ROLE_IGNORE,
    ROLE_LABEL,
    ROLE_SENSITIVE,
    ROLES,
)
from .exceptions import DatasetError, GraphError, SchemaError

_LOGGER = logging.getLogger(__name__)

Cell = Tuple[int, int]


@dataclass(frozen=True)
class FeatureBlock:
    """Columns of the feature matrix that encode one raw attribute."""

    name: str
    kind: str
    start: int
    stop: int
    raw_min: Optional[float] = None
    raw_max: Optional[float] = None
    categories: Tuple[str, ...] = ()

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)

    def to_dict(self) -> Dict[str, object]:
        """JSON-ready form, read back by :meth:`from_dict`."""
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "FeatureBlock":
        values = dict(data)
        values["categories"] = tuple(values.get("categories") or ())
        return cls(**values)


@dataclass(frozen=True)
class DatasetSchema:
    """Column-role map for ingestion.

    Columns missing from ``columns`` take ``default_role``. ``good_value`` is
    the raw label value that means a good customer.
    """

    columns: Mapping[str, str]
    good_value: str
    default_role: str = ROLE_IGNORE
    include_sensitive: bool = False
    guarded_columns: Tuple[str, ...] = ()

    def resolve_roles(self, header: Sequence[str]) -> Dict[str, str]:
        """Assign a role to every column of ``header``."""
        unknown = [name for name in self.columns if name not in header]
        if unknown:
            raise SchemaError(f"Unknown column(s) in schema: {', '.join(unknown)}")

        roles = {}
        for name in header:
            role = self.columns.get(name, self.default_role)
            if role not in ROLES:
                raise SchemaError(f"Column {name!r} has unknown role {role!r}")
            roles[name] = role

        for required in (ROLE_SENSITIVE, ROLE_LABEL):
            count = sum(1 for role in roles.values() if role == required)
            if count != 1:
                raise SchemaError(
                    f"Schema must designate exactly one {required} column, "
                    f"found {count}"
                )
        return roles


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    result = np.array(array, dtype=dtype, copy=True)
    result.setflags(write=False)
    return result


@dataclass(frozen=True, eq=False)
class CreditGraph:
    """Node features, sensitive tags, labels and undirected edges.

    ``sensitive`` holds :data:`GROUP_OVER` / :data:`GROUP_UNDER` tags and
    ``labels`` holds :data:`LABEL_BAD` / :data:`LABEL_GOOD`. ``edges`` are
    pairs of node ids (not positions), stored with the smaller id first,
    deduplicated and sorted. All arrays are read-only.
    """

    features: np.ndarray
    sensitive: np.ndarray
    labels: np.ndarray
    node_ids: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    feature_names: Tuple[str, ...] = ()
    layout: Tuple[FeatureBlock, ...] = ()
    group_names: Tuple[str, str] = DEFAULT_GROUP_NAMES

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise GraphError(f"Feature matrix must be 2-D, got shape {features.shape}")
        num_nodes = features.shape[0]

        for name in ("sensitive", "labels", "node_ids"):
            if len(getattr(self, name)) != num_nodes:
                raise GraphError(
                    f"{name} has {len(getattr(self, name))} entries "
                    f"for {num_nodes} nodes"
                )
        if np.isnan(features).any():
            raise GraphError("Feature matrix contains missing entries")

        node_ids = np.asarray(self.node_ids, dtype=np.int64)
        if len(np.unique(node_ids)) != num_nodes:
            raise GraphError("Node ids must be unique")

        object.__setattr__(self, "features", _frozen(features, np.float64))
        object.__setattr__(self, "sensitive", _frozen(self.sensitive, np.int8))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int8))
        object.__setattr__(self, "node_ids", _frozen(node_ids, np.int64))
        object.__setattr__(self, "edges", _frozen(self._normalize_edges(), np.int64))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "layout", tuple(self.layout))
        object.__setattr__(self, "group_names", tuple(self.group_names))

    def _normalize_edges(self) -> np.ndarray:
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("Self-loops are not allowed")
        missing = ~np.isin(edges, np.asarray(self.node_ids))
        if missing.any():
            raise GraphError(f"Edge references unknown node id {edges[missing][0]}")
        edges = np.sort(edges, axis=1)
        return np.unique(edges, axis=0)

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_edges(self) -> int:
        return int(len(self.edges))

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        """Row positions of ``ids``; -1 for ids not in the graph."""
        if not isinstance(ids, np.ndarray):
            ids = list(ids)
        ids = np.asarray(ids, dtype=np.int64).ravel()
        return pd.Index(self.node_ids).get_indexer(ids)

    def edge_positions(self) -> np.ndarray:
        """Edges expressed as row positions instead of node ids."""
        if self.num_edges == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return self.positions(self.edges.ravel()).reshape(-1, 2)

    def replace(self, **changes) -> "CreditGraph":
        return dataclasses.replace(self, **changes)

    def with_edges(self, edges: np.ndarray) -> "CreditGraph":
        return self.replace(edges=edges)

    def equals(self, other: "CreditGraph") -> bool:
        """Exact equality of every array and the metadata."""
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.sensitive, other.sensitive)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.node_ids, other.node_ids)
            and np.array_equal(self.edges, other.edges)
            and self.feature_names == other.feature_names
            and self.layout == other.layout
            and self.group_names == other.group_names
        )


@dataclass(frozen=True)
class BalanceCounts:
    """Group and label tallies.

    ``total``, ``over``, ``under``, ``good`` and ``bad`` are the X, O, U, G
    and B of the rebalancing formulas; ``per_cell`` maps (group, label) to its
    node count.
    """

    total: int
    over: int
    under: int
    good: int
    bad: int
    per_cell: Mapping[Cell, int]

    def __post_init__(self) -> None:
        if self.total != self.over + self.under or self.total != self.good + self.bad:
            raise GraphError(f"Inconsistent balance counts: {self}")

    def cell(self, group: int, label: int) -> int:
        return int(self.per_cell.get((group, label), 0))

    def to_dict(self) -> Dict[str, object]:
        return {
            "X": self.total,
            "O": self.over,
            "U": self.under,
            "G": self.good,
            "B": self.bad,
            "cells": {
                f"{group}/{label}": self.cell(group, label)
                for group in GROUPS
                for label in LABELS
            },
        }

    @classmethod
    def from_cells(cls, cells: Mapping[Cell, int]) -> "BalanceCounts":
        per_cell = {
            (group, label): int(cells.get((group, label), 0))
            for group in GROUPS
            for label in LABELS
        }
        over = per_cell[(GROUP_OVER, LABEL_BAD)] + per_cell[(GROUP_OVER, LABEL_GOOD)]
        under = per_cell[(GROUP_UNDER, LABEL_BAD)] + per_cell[(GROUP_UNDER, LABEL_GOOD)]
        good = per_cell[(GROUP_OVER, LABEL_GOOD)] + per_cell[(GROUP_UNDER, LABEL_GOOD)]
        bad = per_cell[(GROUP_OVER, LABEL_BAD)] + per_cell[(GROUP_UNDER, LABEL_BAD)]
        return cls(over + under, over, under, good, bad, per_cell)


def tally(sensitive: np.ndarray, labels: np.ndarray) -> BalanceCounts:
    """Count nodes per (group, label) cell."""
    sensitive = np.asarray(sensitive, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    flat = np.bincount(sensitive * 2 + labels, minlength=4)
    cells = {
        (group, label): int(flat[group * 2 + label])
        for group in GROUPS
        for label in LABELS
    }
    return BalanceCounts.from_cells(cells)


def group_counts(graph: CreditGraph) -> BalanceCounts:
    """Exact group, label and per-cell counts of ``graph``."""
    return tally(graph.sensitive, graph.labels)


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DatasetError(f"Dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as err:
        raise DatasetError(f"Dataset {path} has no rows") from err
    if frame.empty:
        raise DatasetError(f"Dataset {path} has no rows")
    frame.columns = [str(name).strip() for name in frame.columns]
    return frame.apply(lambda column: column.str.strip())


def _check_complete(frame: pd.DataFrame, columns: List[str]) -> None:
    for name in columns:
        blank = frame[name] == ""
        if blank.any():
            row = int(np.flatnonzero(blank.to_numpy())[0])
            raise DatasetError(f"Missing value in column {name!r} at row {row + 1}")


def _encode_continuous(
    name: str, values: pd.Series, start: int
) -> Tuple[np.ndarray, FeatureBlock]:
    numeric = pd.to_numeric(values, errors="coerce")
    bad = numeric.isna().to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DatasetError(
            f"Unparseable numeric cell {values.iloc[row]!r} in column {name!r} "
            f"at row {row + 1}"
        )
    scaler = MinMaxScaler()
    # A constant column scales to all zeros.
    scaled = scaler.fit_transform(numeric.to_numpy(dtype=np.float64).reshape(-1, 1))
    low, high = float(scaler.data_min_[0]), float(scaler.data_max_[0])
    block = FeatureBlock(name, BLOCK_CONTINUOUS, start, start + 1, low, high)
    return scaled, block


def _encode_categorical(
    name: str, values: pd.Series, start: int
) -> Tuple[np.ndarray, FeatureBlock]:
    onehot = pd.get_dummies(values, dtype=float)
    categories = tuple(str(category) for category in onehot.columns)
    block = FeatureBlock(
        name, BLOCK_CATEGORICAL, start, start + len(categories), categories=categories
    )
    return onehot.to_numpy(dtype=np.float64), block


def ingest_dataset(
    feature_file: Union[str, Path], schema: DatasetSchema
) -> CreditGraph:
    """
    Read a comma-separated file with a header row into an edgeless graph.

    Continuous columns are min-max scaled to [0, 1] over the whole file and
    categorical columns are one-hot encoded with categories in sorted order.
    The label column never enters the feature matrix; the sensitive column
    does only when ``schema.include_sensitive`` is set.

    Args:
        feature_file: Path of the tabular file
        schema: Column-role map

    Returns:
        Graph with one node per row, node ids 0..n-1 and no edges
    """
    path = Path(feature_file)
    frame = _read_frame(path)
    roles = schema.resolve_roles(list(frame.columns))
    used = [name for name, role in roles.items() if role != ROLE_IGNORE]
    _check_complete(frame, used)

    by_role = {role: name for name, role in roles.items()}
    sensitive_name = by_role[ROLE_SENSITIVE]
    label_name = by_role[ROLE_LABEL]

    raw_groups = frame[sensitive_name]
    counts = raw_groups.value_counts()
    if len(counts) != 2:
        raise DatasetError(
            f"Sensitive column {sensitive_name!r} must have exactly two values, "
            f"found {len(counts)}"
        )
    # Larger group first; ties fall back to sorted order.
    ordered = sorted(counts.index, key=lambda value: (-counts[value], value))
    over_name, under_name = ordered
    sensitive = np.where(raw_groups == over_name, GROUP_OVER, GROUP_UNDER)

    raw_labels = frame[label_name]
    label_values = set(raw_labels.unique())
    good_value = str(schema.good_value)
    if len(label_values) > 2:
        raise DatasetError(
            f"Label column {label_name!r} must be binary, "
            f"found {len(label_values)} values"
        )
    if good_value not in label_values:
        raise DatasetError(
            f"Good label value {good_value!r} not found in {label_name!r}"
        )
    labels = np.where(raw_labels == good_value, LABEL_GOOD, LABEL_BAD)

    blocks: List[FeatureBlock] = []
    parts: List[np.ndarray] = []
    names: List[str] = []
    start = 0
    for name, role in roles.items():
        if role == ROLE_CONTINUOUS:
            part, block = _encode_continuous(name, frame[name], start)
            names.append(name)
        elif role == ROLE_CATEGORICAL:
            part, block = _encode_categorical(name, frame[name], start)
            names.extend(f"{name}={category}" for category in block.categories)
        elif role == ROLE_SENSITIVE and schema.include_sensitive:
            part = sensitive.astype(np.float64).reshape(-1, 1)
            block = FeatureBlock(name, BLOCK_SENSITIVE, start, start + 1, 0.0, 1.0)
            names.append(name)
        else:
            continue
        parts.append(part)
        blocks.append(block)
        start = block.stop

    for guarded in schema.guarded_columns:
        if roles.get(guarded) != ROLE_CONTINUOUS:
            raise SchemaError(
                f"Guarded column {guarded!r} must be a continuous feature"
            )

    features = np.hstack(parts) if parts else np.zeros((len(frame), 0))
    graph = CreditGraph(
        features=features,
        sensitive=sensitive,
        labels=labels,
        node_ids=np.arange(len(frame)),
        feature_names=tuple(names),
        layout=tuple(blocks),
        group_names=(over_name, under_name),
    )
    counts = group_counts(graph)
    _LOGGER.info(
        "Ingested %s: %d nodes, %d feature columns, %s/%s = %d/%d",
        path.name,
        graph.num_nodes,
        graph.num_features,
        over_name,
        under_name,
        counts.over,
        counts.under,
    )
    return graph


def build_knn_edges(
    graph: CreditGraph, k: int = DEFAULT_KNN_K, metric: str = DEFAULT_KNN_METRIC
) -> np.ndarray:
    """
    Symmetrized k-nearest-neighbor edges in feature space.

    Each node links to its ``k`` nearest other nodes; distance ties go to the
    lower node id. The result is the union of the directed relations.

    Returns:
        (m, 2) array of node-id pairs, smaller id first, sorted
    """
    if metric not in KNN_METRICS:
        raise GraphError(f"Unknown kNN metric {metric!r}")
    if k < 1:
        raise GraphError(f"k must be positive, got {k}")
    if k >= graph.num_nodes:
        raise GraphError(f"k={k} must be smaller than the node count {graph.num_nodes}")

    distances = cdist(graph.features, graph.features, metric=metric)
    # Cosine distance is undefined for all-zero rows.
    distances = np.nan_to_num(distances, nan=1.0)
    np.fill_diagonal(distances, np.inf)

    ids = np.broadcast_to(graph.node_ids, distances.shape)
    order = np.lexsort((ids, distances), axis=-1)[:, :k]

    sources = np.repeat(graph.node_ids, k)
    targets = graph.node_ids[order.ravel()]
    edges = np.sort(np.stack([sources, targets], axis=1), axis=1)
    edges = np.unique(edges, axis=0)
    _LOGGER.debug("Built %d kNN edges (k=%d, metric=%s)", len(edges), k, metric)
    return edges


def induced_subgraph(graph: CreditGraph, keep: Iterable[int]) -> CreditGraph:
    """
    Restrict ``graph`` to the node ids in ``keep``.

    Rows keep their original order and ids; edges survive only when both
    endpoints are kept.
    """
    keep_ids = np.unique(np.asarray(list(keep), dtype=np.int64))
    positions = graph.positions(keep_ids)
    if np.any(positions < 0):
        raise GraphError(f"Unknown node id {keep_ids[positions < 0][0]} in keep set")

    mask = np.zeros(graph.num_nodes, dtype=bool)
    mask[positions] = True
    edge_mask = np.isin(graph.edges, keep_ids).all(axis=1)

    return graph.replace(
        features=graph.features[mask],
        sensitive=graph.sensitive[mask],
        labels=graph.labels[mask],
        node_ids=graph.node_ids[mask],
        edges=graph.edges[edge_mask],
    )
