"""
Three-layer graph convolutional network for evaluating prepared datasets.

Training is transductive: one full-graph forward pass per epoch with the
cross-entropy restricted to training nodes, optimized with Adam.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .const import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN,
    DEFAULT_LEARNING_RATE,
    DEFAULT_SEED,
    DEFAULT_TRAIN_FRACTION,
    GROUPS,
    LABELS,
    LOG_EVERY_EPOCHS,
    POSITIVE_LABEL,
)
from .exceptions import TrainingError
from .graph_core import CreditGraph
from .utils.autodiff import (
    Adam,
    Tensor,
    glorot_uniform,
    relu,
    softmax,
    softmax_cross_entropy,
)

_LOGGER = logging.getLogger(__name__)

NUM_CLASSES = len(LABELS)


@dataclass(frozen=True)
class TrainConfig:
    """GCN hyperparameters."""

    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    hidden: Tuple[int, int] = tuple(DEFAULT_HIDDEN)
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    seed: int = DEFAULT_SEED
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise TrainingError(
                f"Split fraction must be in (0, 1), got {self.train_fraction}"
            )
        if self.epochs < 1:
            raise TrainingError(f"epochs must be positive, got {self.epochs}")


def normalize_adjacency(graph: CreditGraph) -> np.ndarray:
    """
    Symmetric normalized adjacency D^-1/2 (A + I) D^-1/2 as a dense matrix.

    Args:
        graph: Graph whose edges define A

    Returns:
        (n, n) matrix; isolated nodes get a diagonal entry of exactly 1
    """
    n = graph.num_nodes
    adjacency = np.eye(n)
    positions = graph.edge_positions()
    adjacency[positions[:, 0], positions[:, 1]] = 1.0
    adjacency[positions[:, 1], positions[:, 0]] = 1.0
    inv_sqrt = 1.0 / np.sqrt(adjacency.sum(axis=1))
    return adjacency * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass
class NodeSplit:
    """Disjoint train/test node ids plus cells that could not be stratified."""

    train: np.ndarray
    test: np.ndarray
    fallback_cells: List[Tuple[int, int]] = field(default_factory=list)

    def fallback_record(self) -> List[List[int]]:
        """Fallback cells as ``[group, label]`` pairs for provenance files."""
        return [[int(group), int(label)] for group, label in self.fallback_cells]


def split_nodes(graph: CreditGraph, fraction: float, seed: int) -> NodeSplit:
    """
    Stratified train/test split over (group, label) cells.

    Cells with fewer than two nodes cannot be stratified; their nodes are
    assigned to train independently with probability ``fraction``.
    """
    if not 0 < fraction < 1:
        raise TrainingError(f"Split fraction must be in (0, 1), got {fraction}")

    rng = np.random.default_rng(seed)
    train: List[np.ndarray] = []
    test: List[np.ndarray] = []
    fallback = []
    for group in GROUPS:
        for label in LABELS:
            in_cell = (graph.sensitive == group) & (graph.labels == label)
            members = graph.node_ids[in_cell]
            if len(members) == 0:
                continue
            if len(members) < 2:
                fallback.append((group, label))
                to_train = rng.random(len(members)) < fraction
                train.append(members[to_train])
                test.append(members[~to_train])
                continue
            shuffled = rng.permutation(members)
            cut = int(np.clip(round(fraction * len(members)), 1, len(members) - 1))
            train.append(shuffled[:cut])
            test.append(shuffled[cut:])

    if fallback:
        _LOGGER.warning("Cells %s too small to stratify; assigned randomly", fallback)
    empty = np.zeros(0, dtype=np.int64)
    return NodeSplit(
        train=np.sort(np.concatenate(train)) if train else empty,
        test=np.sort(np.concatenate(test)) if test else empty,
        fallback_cells=fallback,
    )


class GcnModel:
    """Three graph convolutions (features -> h1 -> h2 -> 2) with ReLU between."""

    def __init__(self, weights: Sequence[np.ndarray]) -> None:
        if len(weights) != 3:
            raise TrainingError(
                f"A GCN needs three weight matrices, got {len(weights)}"
            )
        self.weights = [Tensor.parameter(weight) for weight in weights]

    @classmethod
    def initialize(
        cls, num_features: int, hidden: Sequence[int], seed: int
    ) -> "GcnModel":
        rng = np.random.default_rng(seed)
        sizes = [num_features, *hidden, NUM_CLASSES]
        return cls([glorot_uniform(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])])

    def logits(self, adjacency: np.ndarray, features: np.ndarray) -> Tensor:
        propagate = Tensor.constant(adjacency)
        hidden = Tensor.constant(features)
        for index, weight in enumerate(self.weights):
            hidden = propagate @ (hidden @ weight)
            if index < len(self.weights) - 1:
                hidden = relu(hidden)
        return hidden

    def predict_proba(self, adjacency: np.ndarray, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(adjacency, features).value)

    def loss(
        self,
        adjacency: np.ndarray,
        features: np.ndarray,
        labels: np.ndarray,
        rows: np.ndarray,
    ) -> Tensor:
        return softmax_cross_entropy(self.logits(adjacency, features), labels, rows)

    def weight_values(self) -> List[np.ndarray]:
        return [weight.value.copy() for weight in self.weights]


@dataclass
class TrainedModel:
    """Trained weights with predictions for every node of the graph."""

    model: GcnModel
    node_ids: np.ndarray
    probabilities: np.ndarray
    predictions: np.ndarray
    split: NodeSplit
    loss_history: List[float]

    @property
    def positive_probability(self) -> np.ndarray:
        return self.probabilities[:, POSITIVE_LABEL]


def train(
    graph: CreditGraph, config: TrainConfig, split: Optional[NodeSplit] = None
) -> TrainedModel:
    """
    Fit a GCN on the training nodes of ``graph`` and predict every node.

    Args:
        graph: Prepared dataset
        config: Hyperparameters and seed
        split: Precomputed split; drawn from ``config.seed`` when omitted

    Returns:
        Trained model, per-node probabilities and argmax predictions
    """
    if split is None:
        split = split_nodes(graph, config.train_fraction, config.seed)
    rows = graph.positions(split.train)
    if len(np.unique(graph.labels[rows])) < NUM_CLASSES:
        raise TrainingError("Training set must contain both classes")

    adjacency = normalize_adjacency(graph)
    model = GcnModel.initialize(graph.num_features, config.hidden, config.seed)
    optimizer = Adam(model.weights, config.learning_rate, config.beta1, config.beta2)

    history = []
    for epoch in range(1, config.epochs + 1):
        optimizer.zero_grad()
        loss = model.loss(adjacency, graph.features, graph.labels, rows)
        value = float(loss.value)
        if not np.isfinite(value):
            raise TrainingError(f"Non-finite training loss at epoch {epoch}", epoch)
        history.append(value)
        loss.backward()
        optimizer.step()
        if epoch == 1 or epoch % LOG_EVERY_EPOCHS == 0:
            _LOGGER.debug("GCN epoch %d: loss %.6f", epoch, value)

    probabilities = model.predict_proba(adjacency, graph.features)
    return TrainedModel(
        model=model,
        node_ids=graph.node_ids.copy(),
        probabilities=probabilities,
        predictions=probabilities.argmax(axis=1),
        split=split,
        loss_history=history,
    )
