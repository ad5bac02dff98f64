"""
Mitigation by synthetic augmentation of the underrepresented group.

A two-layer mean-aggregation encoder and a dense decoder are trained as a
graph autoencoder. A diagonal Gaussian mixture fitted on the latent codes of
the underrepresented group is sampled, decoded, checked against ranges taken
from the original data, labelled by a nearest-neighbour vote, and wired into
the graph next to its closest real nodes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .const import (
    BLOCK_CATEGORICAL,
    BLOCK_CONTINUOUS,
    BLOCK_SENSITIVE,
    DEFAULT_AE_EPOCHS,
    DEFAULT_AE_HIDDEN,
    DEFAULT_AE_LEARNING_RATE,
    DEFAULT_ATTACH_K,
    DEFAULT_COVARIANCE_FLOOR,
    DEFAULT_GMM_COMPONENTS,
    DEFAULT_GMM_MAX_ITER,
    DEFAULT_GMM_TOL,
    DEFAULT_LABEL_NEIGHBORS,
    DEFAULT_LATENT_DIM,
    DEFAULT_RETRY_FACTOR,
    GROUP_UNDER,
    LABEL_BAD,
    LABEL_GOOD,
    LOG_EVERY_EPOCHS,
    SNAP_MAX_LEVELS,
)
from .exceptions import BalanceError, GenerationError, GraphError, TrainingError
from .graph_core import BalanceCounts, CreditGraph, group_counts
from .utils.autodiff import Adam, Tensor, glorot_uniform, mse_loss, sigmoid, tanh

_LOGGER = logging.getLogger(__name__)


def compute_na(counts: BalanceCounts) -> int:
    """Number of synthetic underrepresented nodes needed: NA = O - U."""
    if counts.over < counts.under:
        raise BalanceError(
            f"Group roles are inverted: O={counts.over} < U={counts.under}"
        )
    return counts.over - counts.under


def mean_aggregation(graph: CreditGraph) -> np.ndarray:
    """Row-normalized adjacency; an isolated node aggregates only itself."""
    n = graph.num_nodes
    adjacency = np.zeros((n, n))
    positions = graph.edge_positions()
    adjacency[positions[:, 0], positions[:, 1]] = 1.0
    adjacency[positions[:, 1], positions[:, 0]] = 1.0
    degree = adjacency.sum(axis=1)
    isolated = degree == 0
    adjacency[isolated, isolated] = 1.0
    degree[isolated] = 1.0
    return adjacency / degree[:, None]


class SageEncoder:
    """Two mean-aggregation layers: h' = h Ws + mean(h_nbrs) Wn + b.

    The first layer applies tanh; the second emits the latent code.
    """

    def __init__(self, self_weights, neighbor_weights, biases) -> None:
        self.self_weights = [Tensor.parameter(w) for w in self_weights]
        self.neighbor_weights = [Tensor.parameter(w) for w in neighbor_weights]
        self.biases = [Tensor.parameter(b) for b in biases]

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, num_features: int, hidden: int, latent: int
    ) -> "SageEncoder":
        if latent >= num_features:
            raise TrainingError(
                f"Latent size {latent} must be smaller than the feature size "
                f"{num_features}"
            )
        sizes = [(num_features, hidden), (hidden, latent)]
        return cls(
            [glorot_uniform(rng, a, b) for a, b in sizes],
            [glorot_uniform(rng, a, b) for a, b in sizes],
            [np.zeros((1, b)) for _, b in sizes],
        )

    @property
    def latent_dim(self) -> int:
        return self.self_weights[-1].shape[1]

    def parameters(self) -> List[Tensor]:
        return [*self.self_weights, *self.neighbor_weights, *self.biases]

    def forward(self, features: np.ndarray, aggregation: np.ndarray) -> Tensor:
        mean = Tensor.constant(aggregation)
        hidden = Tensor.constant(features)
        layers = zip(self.self_weights, self.neighbor_weights, self.biases)
        for index, (w_self, w_neighbor, bias) in enumerate(layers):
            hidden = hidden @ w_self + (mean @ hidden) @ w_neighbor + bias
            if index == 0:
                hidden = tanh(hidden)
        return hidden

    def encode(self, graph: CreditGraph) -> np.ndarray:
        return self.forward(graph.features, mean_aggregation(graph)).value

    def encode_rows(self, rows: np.ndarray) -> np.ndarray:
        """Latent codes of rows treated as isolated nodes."""
        return self.forward(rows, np.eye(len(rows))).value


class FeatureDecoder:
    """Dense latent -> hidden (tanh) -> features (sigmoid, inside [0, 1])."""

    def __init__(self, weights, biases) -> None:
        self.weights = [Tensor.parameter(w) for w in weights]
        self.biases = [Tensor.parameter(b) for b in biases]

    @classmethod
    def initialize(
        cls, rng: np.random.Generator, latent: int, hidden: int, num_features: int
    ) -> "FeatureDecoder":
        sizes = [(latent, hidden), (hidden, num_features)]
        return cls(
            [glorot_uniform(rng, a, b) for a, b in sizes],
            [np.zeros((1, b)) for _, b in sizes],
        )

    def parameters(self) -> List[Tensor]:
        return [*self.weights, *self.biases]

    def forward(self, latent: Tensor) -> Tensor:
        hidden = tanh(latent @ self.weights[0] + self.biases[0])
        return sigmoid(hidden @ self.weights[1] + self.biases[1])

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return self.forward(Tensor.constant(latent)).value


class TrainedAutoencoder(NamedTuple):
    encoder: SageEncoder
    decoder: FeatureDecoder
    loss_history: List[float]


def reconstruction_loss(
    encoder: SageEncoder,
    decoder: FeatureDecoder,
    features: np.ndarray,
    aggregation: np.ndarray,
) -> Tensor:
    return mse_loss(decoder.forward(encoder.forward(features, aggregation)), features)


def train_autoencoder(
    graph: CreditGraph,
    epochs: int = DEFAULT_AE_EPOCHS,
    learning_rate: float = DEFAULT_AE_LEARNING_RATE,
    seed: int = 0,
    hidden: int = DEFAULT_AE_HIDDEN,
    latent: int = DEFAULT_LATENT_DIM,
) -> TrainedAutoencoder:
    """
    Train encoder and decoder to reconstruct node features.

    Args:
        graph: Non-empty graph; isolated nodes aggregate themselves
        epochs: Full-batch Adam steps
        learning_rate: Adam step size
        seed: Weight initialization seed
        hidden: Hidden width of both networks
        latent: Latent code size

    Returns:
        Trained encoder, decoder and the per-epoch reconstruction MSE
    """
    if graph.num_nodes == 0:
        raise TrainingError("Cannot train an autoencoder on an empty graph")

    rng = np.random.default_rng(seed)
    encoder = SageEncoder.initialize(rng, graph.num_features, hidden, latent)
    decoder = FeatureDecoder.initialize(rng, latent, hidden, graph.num_features)
    optimizer = Adam(encoder.parameters() + decoder.parameters(), learning_rate)
    aggregation = mean_aggregation(graph)

    history = []
    for epoch in range(1, epochs + 1):
        optimizer.zero_grad()
        loss = reconstruction_loss(encoder, decoder, graph.features, aggregation)
        value = float(loss.value)
        if not np.isfinite(value):
            raise TrainingError(f"Autoencoder loss diverged at epoch {epoch}", epoch)
        history.append(value)
        loss.backward()
        optimizer.step()
        if epoch == 1 or epoch % LOG_EVERY_EPOCHS == 0:
            _LOGGER.debug("Autoencoder epoch %d: reconstruction MSE %.6f", epoch, value)

    return TrainedAutoencoder(encoder, decoder, history)


@dataclass(frozen=True)
class LatentGMM:
    """Diagonal Gaussian mixture in latent space."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood_trace: Tuple[float, ...] = ()
    converged: bool = False

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def log_joint(self, x: np.ndarray) -> np.ndarray:
        """log(w_k) + log N(x | mean_k, diag(var_k)) for every row and component."""
        diff = x[:, None, :] - self.means[None, :, :]
        log_density = -0.5 * (
            np.log(2.0 * np.pi * self.variances)[None, :, :] + diff**2 / self.variances
        ).sum(axis=2)
        return np.log(self.weights)[None, :] + log_density

    def log_likelihood(self, x: np.ndarray) -> float:
        return float(logsumexp(self.log_joint(x), axis=1).sum())

    def sample(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        components = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.means.shape[1]))
        spread = np.sqrt(self.variances[components]) * noise
        return self.means[components] + spread, components


def _farthest_points(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(len(x)))]
    distance = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        chosen.append(int(np.argmax(distance)))
        distance = np.minimum(distance, ((x - x[chosen[-1]]) ** 2).sum(axis=1))
    return np.asarray(chosen)


def fit_gmm(
    latents: np.ndarray,
    k: int = DEFAULT_GMM_COMPONENTS,
    seed: int = 0,
    max_iter: int = DEFAULT_GMM_MAX_ITER,
    tol: float = DEFAULT_GMM_TOL,
    covariance_floor: float = DEFAULT_COVARIANCE_FLOOR,
) -> LatentGMM:
    """
    Fit a diagonal GMM by expectation-maximization.

    Means start at farthest-point seeds drawn from ``seed``, variances at the
    data variance. Iterates until the log-likelihood improves by less than
    ``tol`` or ``max_iter`` E-steps have run. Variances never drop below
    ``covariance_floor``.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise GenerationError("Cannot fit a mixture to an empty latent set")
    if k < 1:
        raise GenerationError(f"Component count must be at least 1, got {k}")
    if len(x) < k:
        raise GenerationError(f"{len(x)} latent rows cannot support {k} components")

    rng = np.random.default_rng(seed)
    n = len(x)
    gmm = LatentGMM(
        weights=np.full(k, 1.0 / k),
        means=x[_farthest_points(x, k, rng)].copy(),
        variances=np.tile(np.maximum(x.var(axis=0), covariance_floor), (k, 1)),
    )

    trace: List[float] = []
    converged = False
    for iteration in range(max_iter):
        log_joint = gmm.log_joint(x)
        log_norm = logsumexp(log_joint, axis=1)
        trace.append(float(log_norm.sum()))
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break

        resp = np.exp(log_joint - log_norm[:, None])
        totals = resp.sum(axis=0) + 10 * np.finfo(np.float64).eps
        means = resp.T @ x / totals[:, None]
        spread = np.einsum("nk,nkd->kd", resp, (x[:, None, :] - means[None, :, :]) ** 2)
        gmm = LatentGMM(
            weights=totals / totals.sum(),
            means=means,
            variances=np.maximum(spread / totals[:, None], covariance_floor),
        )
        _LOGGER.debug("EM iteration %d: log-likelihood %.6f", iteration, trace[-1])

    _LOGGER.info(
        "Fitted %d-component GMM on %d codes in %d iterations (log-likelihood %.4f)",
        k,
        n,
        len(trace),
        trace[-1],
    )
    return LatentGMM(gmm.weights, gmm.means, gmm.variances, tuple(trace), converged)


@dataclass(frozen=True)
class ValidityRules:
    """Admissible values for synthetic rows, taken from original data only.

    ``ranges`` maps a column to its observed [min, max]; ``levels`` maps a
    low-cardinality column to its observed values; ``categorical`` lists
    one-hot blocks as (start, stop, allowed offsets); ``label_ranges`` maps a
    guarded column to per-label [min, max].
    """

    ranges: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    levels: Dict[int, np.ndarray] = field(default_factory=dict)
    categorical: Tuple[Tuple[int, int, Tuple[int, ...]], ...] = ()
    label_ranges: Dict[int, Dict[int, Tuple[float, float]]] = field(
        default_factory=dict
    )

    @classmethod
    def from_graph(
        cls, graph: CreditGraph, guarded_columns: Sequence[str] = ()
    ) -> "ValidityRules":
        features = graph.features
        ranges, levels, categorical, label_ranges = {}, {}, [], {}
        for block in graph.layout:
            if block.kind in (BLOCK_CONTINUOUS, BLOCK_SENSITIVE):
                column = features[:, block.start]
                ranges[block.start] = (float(column.min()), float(column.max()))
                observed = np.unique(column)
                if len(observed) <= SNAP_MAX_LEVELS:
                    levels[block.start] = observed
                if block.name in guarded_columns:
                    label_ranges[block.start] = {
                        label: (
                            float(column[graph.labels == label].min()),
                            float(column[graph.labels == label].max()),
                        )
                        for label in (LABEL_BAD, LABEL_GOOD)
                        if np.any(graph.labels == label)
                    }
            elif block.kind == BLOCK_CATEGORICAL:
                seen = np.flatnonzero(features[:, block.columns].sum(axis=0) > 0)
                kept = tuple(int(i) for i in seen)
                categorical.append((block.start, block.stop, kept))
        return cls(ranges, levels, tuple(categorical), label_ranges)

    def snap(self, rows: np.ndarray) -> np.ndarray:
        """Round discrete columns to observed levels and one-hot blocks to argmax."""
        rows = np.array(rows, dtype=np.float64, copy=True)
        for column, observed in self.levels.items():
            nearest = np.abs(rows[:, column, None] - observed[None, :]).argmin(axis=1)
            rows[:, column] = observed[nearest]
        for start, stop, _ in self.categorical:
            winners = rows[:, start:stop].argmax(axis=1)
            rows[:, start:stop] = np.eye(stop - start)[winners]
        return rows

    def check(
        self, rows: np.ndarray, labels: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Boolean mask of rows that satisfy every rule."""
        valid = np.ones(len(rows), dtype=bool)
        for column, (low, high) in self.ranges.items():
            valid &= (rows[:, column] >= low) & (rows[:, column] <= high)
        for start, stop, allowed in self.categorical:
            valid &= np.isin(rows[:, start:stop].argmax(axis=1), allowed)
        if labels is not None:
            for column, per_label in self.label_ranges.items():
                for label, (low, high) in per_label.items():
                    selected = labels == label
                    inside = (rows[:, column] >= low) & (rows[:, column] <= high)
                    valid &= ~selected | inside
        return valid


@dataclass(frozen=True)
class SyntheticBatch:
    """Accepted synthetic rows with their labels and latent draws."""

    features: np.ndarray
    labels: np.ndarray
    latents: np.ndarray
    draws: int = 0
    rejected: int = 0

    def __len__(self) -> int:
        return len(self.features)


def vote_labels(
    latents: np.ndarray,
    reference_latents: np.ndarray,
    reference_labels: np.ndarray,
    k: int = DEFAULT_LABEL_NEIGHBORS,
) -> np.ndarray:
    """Majority label of the ``k`` nearest reference codes; ties go to the nearest."""
    k = min(k, len(reference_latents))
    distances = cdist(latents, reference_latents)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
    neighbor_labels = np.asarray(reference_labels)[nearest]
    good = (neighbor_labels == LABEL_GOOD).sum(axis=1)
    votes = np.where(good * 2 > k, LABEL_GOOD, LABEL_BAD)
    tied = good * 2 == k
    votes[tied] = neighbor_labels[tied, 0]
    return votes.astype(np.int8)


def sample_synthetic(
    gmm: LatentGMM,
    decoder: FeatureDecoder,
    na: int,
    rules: ValidityRules,
    seed: int,
    reference_latents: np.ndarray,
    reference_labels: np.ndarray,
    label_neighbors: int = DEFAULT_LABEL_NEIGHBORS,
    retry_factor: int = DEFAULT_RETRY_FACTOR,
) -> SyntheticBatch:
    """
    Draw ``na`` valid synthetic rows by rejection sampling.

    Candidates are decoded GMM draws, snapped to discrete levels, labelled by
    a vote of the nearest real codes and kept only if they pass ``rules``.
    Acceptance follows draw order, so the result depends only on ``seed``.
    """
    if na < 0:
        raise GenerationError(f"Synthetic count must be non-negative, got {na}")
    width = len(decoder.biases[-1].value.ravel())
    if na == 0:
        return SyntheticBatch(
            np.zeros((0, width)),
            np.zeros(0, dtype=np.int8),
            np.zeros((0, gmm.means.shape[1])),
        )

    rng = np.random.default_rng(seed)
    cap = retry_factor * na
    rows: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    latents: List[np.ndarray] = []
    accepted = draws = 0
    while accepted < na:
        if draws >= cap:
            raise GenerationError(
                f"Only {accepted} of {na} synthetic rows passed validation "
                f"after {draws} draws"
            )
        batch = min(na - accepted, cap - draws)
        codes, _ = gmm.sample(batch, rng)
        candidates = rules.snap(decoder.decode(codes))
        votes = vote_labels(codes, reference_latents, reference_labels, label_neighbors)
        valid = rules.check(candidates, votes)
        draws += batch
        rows.append(candidates[valid])
        labels.append(votes[valid])
        latents.append(codes[valid])
        accepted += int(valid.sum())

    return SyntheticBatch(
        features=np.vstack(rows)[:na],
        labels=np.concatenate(labels)[:na],
        latents=np.vstack(latents)[:na],
        draws=draws,
        rejected=draws - accepted,
    )


def attach_synthetic(
    graph: CreditGraph,
    synthetic: SyntheticBatch,
    encoder: SageEncoder,
    k: int = DEFAULT_ATTACH_K,
) -> CreditGraph:
    """
    Append synthetic underrepresented nodes, each linked to its ``k`` nearest
    real nodes in latent space (ties to the lower node id).

    Original nodes, features, labels and edges are left as they are.
    """
    if len(synthetic) == 0:
        return graph
    if k > graph.num_nodes:
        raise GraphError(f"k={k} exceeds the {graph.num_nodes} real nodes")

    real = encoder.encode(graph)
    fresh = encoder.encode_rows(synthetic.features)
    distances = cdist(fresh, real)
    ids = np.broadcast_to(graph.node_ids, distances.shape)
    nearest = np.lexsort((ids, distances), axis=-1)[:, :k]

    start = int(graph.node_ids.max()) + 1 if graph.num_nodes else 0
    new_ids = np.arange(start, start + len(synthetic))
    new_edges = np.stack(
        [np.repeat(new_ids, k), graph.node_ids[nearest.ravel()]], axis=1
    )

    rows = np.array(synthetic.features, dtype=np.float64, copy=True)
    for block in graph.layout:
        if block.kind == BLOCK_SENSITIVE:
            rows[:, block.start] = float(GROUP_UNDER)

    return graph.replace(
        features=np.vstack([graph.features, rows]),
        sensitive=np.concatenate(
            [graph.sensitive, np.full(len(synthetic), GROUP_UNDER, dtype=np.int8)]
        ),
        labels=np.concatenate([graph.labels, synthetic.labels]),
        node_ids=np.concatenate([graph.node_ids, new_ids]),
        edges=np.vstack([graph.edges, new_edges]),
    )


@dataclass(frozen=True)
class AugmentSettings:
    """Hyperparameters of the augmentation pipeline."""

    epochs: int = DEFAULT_AE_EPOCHS
    learning_rate: float = DEFAULT_AE_LEARNING_RATE
    hidden: int = DEFAULT_AE_HIDDEN
    latent: int = DEFAULT_LATENT_DIM
    gmm_components: int = DEFAULT_GMM_COMPONENTS
    gmm_max_iter: int = DEFAULT_GMM_MAX_ITER
    gmm_tol: float = DEFAULT_GMM_TOL
    covariance_floor: float = DEFAULT_COVARIANCE_FLOOR
    label_neighbors: int = DEFAULT_LABEL_NEIGHBORS
    attach_k: int = DEFAULT_ATTACH_K
    retry_factor: int = DEFAULT_RETRY_FACTOR
    guarded_columns: Tuple[str, ...] = ()


def augment(
    graph: CreditGraph, settings: AugmentSettings, seed: int
) -> Tuple[CreditGraph, Dict[str, object]]:
    """
    Fill the underrepresented group up to the size of the overrepresented one.

    Returns:
        Augmented graph and a provenance record (NA, retry statistics,
        autoencoder losses, GMM log-likelihood trace)
    """
    na = compute_na(group_counts(graph))
    fit = train_autoencoder(
        graph,
        settings.epochs,
        settings.learning_rate,
        seed,
        settings.hidden,
        settings.latent,
    )
    latents = fit.encoder.encode(graph)
    under = graph.sensitive == GROUP_UNDER
    gmm = fit_gmm(
        latents[under],
        settings.gmm_components,
        seed,
        settings.gmm_max_iter,
        settings.gmm_tol,
        settings.covariance_floor,
    )
    rules = ValidityRules.from_graph(graph, settings.guarded_columns)
    synthetic = sample_synthetic(
        gmm,
        fit.decoder,
        na,
        rules,
        seed,
        latents,
        graph.labels,
        settings.label_neighbors,
        settings.retry_factor,
    )
    result = attach_synthetic(graph, synthetic, fit.encoder, settings.attach_k)
    _LOGGER.info(
        "Added %d synthetic nodes after %d draws (%d rejected)",
        len(synthetic),
        synthetic.draws,
        synthetic.rejected,
    )
    provenance = {
        "NA": na,
        "draws": synthetic.draws,
        "rejected": synthetic.rejected,
        "synthetic_labels": {
            "bad": int((synthetic.labels == LABEL_BAD).sum()),
            "good": int((synthetic.labels == LABEL_GOOD).sum()),
        },
        "autoencoder_loss": {
            "first": fit.loss_history[0],
            "last": fit.loss_history[-1],
        },
        "gmm_log_likelihood": list(gmm.log_likelihood_trace),
        "gmm_converged": gmm.converged,
    }
    return result, provenance
