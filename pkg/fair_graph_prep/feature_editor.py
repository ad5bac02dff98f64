"""
Mitigation by changing features.

Rewrites sensitive tags (and optionally labels) so that group sizes, or all
four (group, label) cells, hit their balance targets. Features and edges are
never touched.
"""

import logging
from typing import Dict, List

import numpy as np

from .const import GROUP_OVER, GROUP_UNDER, LABEL_BAD, LABEL_GOOD
from .exceptions import BalanceError, GraphError
from .graph_core import BalanceCounts, CreditGraph, group_counts

_LOGGER = logging.getLogger(__name__)

# (group, label) cells around a square: neighbours differ in one attribute.
CELL_CYCLE = [
    (GROUP_OVER, LABEL_BAD),
    (GROUP_OVER, LABEL_GOOD),
    (GROUP_UNDER, LABEL_GOOD),
    (GROUP_UNDER, LABEL_BAD),
]


def compute_nc(counts: BalanceCounts) -> int:
    """
    Number of overrepresented nodes to convert so both groups hold X/2.

    Args:
        counts: Group tallies of the graph

    Returns:
        NC = O - X/2
    """
    if counts.total % 2:
        raise BalanceError(f"NC needs an even node count, got X={counts.total}")
    half = counts.total // 2
    if counts.over < half:
        raise BalanceError(
            f"Group roles are inverted: O={counts.over} < X/2={half}; swap the groups"
        )
    return counts.over - half


def compute_nc2(counts: BalanceCounts) -> int:
    """
    NC2 = |G - X/4| + |B - X/4|, evaluated exactly as written.

    G and B are the dataset-wide good and bad counts.
    """
    if counts.total % 4:
        raise BalanceError(f"NC2 needs X divisible by 4, got X={counts.total}")
    quarter = counts.total // 4
    return abs(counts.good - quarter) + abs(counts.bad - quarter)


def reassign_sensitive_random(graph: CreditGraph, seed: int) -> CreditGraph:
    """Flip the tag of NC uniformly chosen overrepresented nodes."""
    nc = compute_nc(group_counts(graph))
    if nc == 0:
        return graph

    rng = np.random.default_rng(seed)
    over_positions = np.flatnonzero(graph.sensitive == GROUP_OVER)
    flipped = rng.choice(over_positions, size=nc, replace=False)

    sensitive = graph.sensitive.copy()
    sensitive[flipped] = GROUP_UNDER
    _LOGGER.info("Reassigned the sensitive tag of %d nodes (seed %d)", nc, seed)
    return graph.replace(sensitive=sensitive)


def _cycle_flows(counts: BalanceCounts, target: int) -> List[int]:
    """Minimum-cost node flows between neighbouring cells of the cycle.

    ``flows[i]`` nodes move from ``CELL_CYCLE[i]`` to ``CELL_CYCLE[i + 1]``
    (negative values move the other way). Choosing the circulation offset as
    the lower median of the prefix sums minimizes the total number of moves.
    """
    excess = [counts.cell(*cell) - target for cell in CELL_CYCLE]
    prefix = list(np.cumsum(excess))
    offset = sorted(prefix)[1]
    return [int(value - offset) for value in prefix]


def reassign_sensitive_and_label(graph: CreditGraph, seed: int) -> CreditGraph:
    """
    Rewrite tags and labels so every (group, label) cell holds X/4 nodes.

    The number of attribute changes is minimal; which nodes change is drawn
    uniformly within each cell.
    """
    counts = group_counts(graph)
    if counts.total % 4:
        raise BalanceError(f"Equal cells need X divisible by 4, got X={counts.total}")
    target = counts.total // 4
    flows = _cycle_flows(counts, target)

    rng = np.random.default_rng(seed)
    pools: Dict[int, List[int]] = {}
    for index, (group, label) in enumerate(CELL_CYCLE):
        members = np.flatnonzero((graph.sensitive == group) & (graph.labels == label))
        pools[index] = list(rng.permutation(members))

    # Every cell sends its outflow only after receiving its inflow.
    moves = []
    for index, flow in enumerate(flows):
        following = (index + 1) % len(CELL_CYCLE)
        if flow > 0:
            moves.append((index, following, flow))
        elif flow < 0:
            moves.append((following, index, -flow))
    pending = list(moves)
    sensitive = graph.sensitive.copy()
    labels = graph.labels.copy()
    while pending:
        ready = [
            move
            for move in pending
            if not any(other[1] == move[0] for other in pending if other is not move)
        ]
        if not ready:
            raise GraphError("Cell flows contain a cycle")
        for source, destination, amount in ready:
            moved, pools[source] = pools[source][:amount], pools[source][amount:]
            group, label = CELL_CYCLE[destination]
            sensitive[moved] = group
            labels[moved] = label
            pools[destination].extend(moved)
            pending.remove((source, destination, amount))

    result = graph.replace(sensitive=sensitive, labels=labels)
    changed = changed_nodes(graph, result)
    _LOGGER.info(
        "Equalized cells to %d each: %d tag changes, %d label changes (seed %d)",
        target,
        len(changed["sensitive"]),
        len(changed["labels"]),
        seed,
    )
    return result


def changed_nodes(before: CreditGraph, after: CreditGraph) -> Dict[str, List[int]]:
    """Node ids whose sensitive tag or label differs between two graphs."""
    if not np.array_equal(before.node_ids, after.node_ids):
        raise GraphError("Graphs must share the same node ids")
    return {
        "sensitive": before.node_ids[before.sensitive != after.sensitive].tolist(),
        "labels": before.node_ids[before.labels != after.labels].tolist(),
    }


def edit_count(before: CreditGraph, after: CreditGraph) -> int:
    """Total number of attribute changes between two graphs."""
    changed = changed_nodes(before, after)
    return len(changed["sensitive"]) + len(changed["labels"])
