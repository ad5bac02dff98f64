"""
Sparsification by node sampling.

Every sampler keeps the whole underrepresented group and returns the sorted
node ids whose induced subgraph is the prepared dataset.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np

from .const import (
    DEFAULT_SAMPLING_TARGET,
    GROUP_OVER,
    GROUP_UNDER,
    LABELS,
    METHOD_RANDOM,
    METHOD_STRATIFIED,
    METHOD_WEIGHTED,
    SAMPLING_METHODS,
    TARGET_BALANCE,
)
from .exceptions import SamplingError
from .graph_core import CreditGraph, group_counts, induced_subgraph

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingSpec:
    """Sampling method, RNG seed and per-group size rule.

    ``target`` is ``"balance"`` (downsample the overrepresented group to the
    size of the underrepresented one) or a ratio in (0, 1] of the
    overrepresented group.
    """

    method: str
    seed: int = 0
    target: Union[str, float] = DEFAULT_SAMPLING_TARGET

    def __post_init__(self) -> None:
        if self.method not in SAMPLING_METHODS:
            raise SamplingError(f"Unknown sampling method {self.method!r}")
        if self.target != TARGET_BALANCE:
            ratio = float(self.target)
            if not 0 < ratio <= 1:
                raise SamplingError(f"Sampling ratio must be in (0, 1], got {ratio}")

    def target_size(self, graph: CreditGraph) -> int:
        """Number of overrepresented nodes to keep."""
        counts = group_counts(graph)
        if self.target == TARGET_BALANCE:
            size = counts.under
        else:
            size = int(round(float(self.target) * counts.over))
        if size > counts.over:
            raise SamplingError(
                f"Target size {size} exceeds overrepresented group size {counts.over}"
            )
        return size


def _group_ids(graph: CreditGraph, group: int) -> np.ndarray:
    return graph.node_ids[graph.sensitive == group]


def _keep(graph: CreditGraph, chosen: np.ndarray) -> np.ndarray:
    return np.sort(np.concatenate([_group_ids(graph, GROUP_UNDER), chosen]))


def random_downsample(graph: CreditGraph, spec: SamplingSpec) -> np.ndarray:
    """Keep a uniform subset of the overrepresented group, without replacement."""
    size = spec.target_size(graph)
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(_group_ids(graph, GROUP_OVER), size=size, replace=False)
    return _keep(graph, chosen)


def stratified_downsample(graph: CreditGraph, spec: SamplingSpec) -> np.ndarray:
    """
    Keep the same number of nodes per label in both groups.

    For each label the overrepresented cell is sampled uniformly down to the
    size of the underrepresented cell, so per-cell counts match exactly.
    """
    rng = np.random.default_rng(spec.seed)
    chosen = []
    for label in LABELS:
        in_cell = graph.labels == label
        over_cell = graph.node_ids[(graph.sensitive == GROUP_OVER) & in_cell]
        under_cell = graph.node_ids[(graph.sensitive == GROUP_UNDER) & in_cell]
        if len(over_cell) < len(under_cell):
            raise SamplingError(
                f"Overrepresented cell for label {label} has {len(over_cell)} nodes, "
                f"fewer than the {len(under_cell)} of its counterpart"
            )
        chosen.append(rng.choice(over_cell, size=len(under_cell), replace=False))
    return _keep(graph, np.concatenate(chosen))


def weighted_downsample(graph: CreditGraph, spec: SamplingSpec) -> np.ndarray:
    """
    Downsample the overrepresented group with inverse cell-frequency weights.

    Draws are without replacement; the remaining weights are renormalized
    after every draw.
    """
    size = spec.target_size(graph)
    rng = np.random.default_rng(spec.seed)

    candidates = _group_ids(graph, GROUP_OVER)
    candidate_labels = graph.labels[graph.sensitive == GROUP_OVER]
    cell_sizes = np.bincount(candidate_labels, minlength=len(LABELS))
    weights = 1.0 / cell_sizes[candidate_labels]
    chosen = rng.choice(candidates, size=size, replace=False, p=weights / weights.sum())
    return _keep(graph, chosen)


SAMPLERS: Dict[str, Callable[[CreditGraph, SamplingSpec], np.ndarray]] = {
    METHOD_RANDOM: random_downsample,
    METHOD_STRATIFIED: stratified_downsample,
    METHOD_WEIGHTED: weighted_downsample,
}


def sparsify(graph: CreditGraph, spec: SamplingSpec) -> CreditGraph:
    """Apply the sampler named by ``spec`` and return the induced subgraph."""
    keep = SAMPLERS[spec.method](graph, spec)
    result = induced_subgraph(graph, keep)
    counts = group_counts(result)
    _LOGGER.info(
        "%s sampling (seed %d) kept %d/%d nodes: groups %d/%d",
        spec.method,
        spec.seed,
        result.num_nodes,
        graph.num_nodes,
        counts.over,
        counts.under,
    )
    return result
