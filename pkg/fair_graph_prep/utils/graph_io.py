"""
Graph file format: a node table, an edge list and a metadata document.

``nodes.csv`` holds id, group, label and one column per feature;
``edges.csv`` holds one ``source,target`` pair per line; ``meta.json``
keeps the feature layout and group names next to the provenance.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from ..const import DEFAULT_GROUP_NAMES, EDGES_FILE, META_FILE, NODES_FILE
from ..exceptions import DatasetError
from ..graph_core import CreditGraph, FeatureBlock
from .files import PathLike, read_csv, read_json, write_csv, write_json

_LOGGER = logging.getLogger(__name__)

NODE_COLUMNS = ["id", "group", "label"]


def write_graph(
    graph: CreditGraph,
    directory: PathLike,
    provenance: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write ``graph`` into ``directory``; returns the directory."""
    directory = Path(directory)
    header = dict(provenance or {})
    names = list(graph.feature_names) or [f"f{i}" for i in range(graph.num_features)]

    nodes = pd.DataFrame(graph.features, columns=names)
    nodes.insert(0, "label", graph.labels.astype(np.int64))
    nodes.insert(0, "group", graph.sensitive.astype(np.int64))
    nodes.insert(0, "id", graph.node_ids)
    edges = pd.DataFrame(graph.edges, columns=["source", "target"])

    write_csv(directory / NODES_FILE, nodes, header)
    write_csv(directory / EDGES_FILE, edges, header)
    write_json(
        directory / META_FILE,
        {
            "feature_names": list(graph.feature_names),
            "layout": [block.to_dict() for block in graph.layout],
            "group_names": list(graph.group_names),
        },
        header,
    )
    _LOGGER.info(
        "Wrote graph with %d nodes and %d edges to %s",
        graph.num_nodes,
        graph.num_edges,
        directory,
    )
    return directory


def read_graph(directory: PathLike) -> Tuple[CreditGraph, Dict[str, Any]]:
    """Load a graph written by :func:`write_graph`; returns (graph, provenance)."""
    directory = Path(directory)
    for name in (NODES_FILE, EDGES_FILE, META_FILE):
        if not (directory / name).is_file():
            raise DatasetError(f"Graph directory {directory} is missing {name}")

    meta = read_json(directory / META_FILE)
    _, nodes = read_csv(directory / NODES_FILE)
    _, edges = read_csv(directory / EDGES_FILE)
    if list(nodes.columns[: len(NODE_COLUMNS)]) != NODE_COLUMNS:
        raise DatasetError(
            f"{directory / NODES_FILE} does not start with {NODE_COLUMNS}"
        )

    graph = CreditGraph(
        features=nodes.iloc[:, len(NODE_COLUMNS) :].to_numpy(dtype=np.float64),
        sensitive=nodes["group"].to_numpy(),
        labels=nodes["label"].to_numpy(),
        node_ids=nodes["id"].to_numpy(),
        edges=edges[["source", "target"]].to_numpy(dtype=np.int64),
        feature_names=tuple(meta.get("feature_names", ())),
        layout=tuple(
            FeatureBlock.from_dict(block) for block in meta.get("layout", [])
        ),
        group_names=tuple(meta.get("group_names", DEFAULT_GROUP_NAMES)),
    )
    return graph, meta.get("provenance", {})
