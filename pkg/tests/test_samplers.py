"""
Tests for the sparsification samplers.
"""

from itertools import combinations

import numpy as np
import pytest

from fair_graph_prep.const import GROUP_OVER, GROUP_UNDER, LABEL_BAD, LABEL_GOOD
from fair_graph_prep.exceptions import SamplingError
from fair_graph_prep.graph_core import group_counts, induced_subgraph
from fair_graph_prep.samplers import (
    SamplingSpec,
    random_downsample,
    sparsify,
    stratified_downsample,
    weighted_downsample,
)


def kept_counts(graph, keep):
    return group_counts(induced_subgraph(graph, keep))


class TestSamplingSpec:
    """Target size rules."""

    def test_unknown_method(self):
        with pytest.raises(SamplingError):
            SamplingSpec("cluster")

    @pytest.mark.parametrize("ratio", [0.0, 1.5, -0.2])
    def test_bad_ratio(self, ratio):
        with pytest.raises(SamplingError):
            SamplingSpec("random", target=ratio)

    def test_ratio_target(self, german_graph):
        assert SamplingSpec("random", target=0.5).target_size(german_graph) == 345

    def test_target_exceeds_group(self, make_graph):
        graph = make_graph([0, 1, 1, 1], [0, 1, 0, 1])
        with pytest.raises(SamplingError, match="exceeds"):
            random_downsample(graph, SamplingSpec("random"))


class TestRandomSampling:
    """Uniform downsampling of the overrepresented group."""

    def test_german_groups(self, german_graph):
        keep = random_downsample(german_graph, SamplingSpec("random", seed=3))
        counts = kept_counts(german_graph, keep)
        assert (counts.over, counts.under) == (310, 310)
        under = german_graph.node_ids[german_graph.sensitive == GROUP_UNDER]
        assert np.isin(under, keep).all()

    def test_balanced_is_identity(self, make_graph):
        graph = make_graph([0, 1, 0, 1, 0, 1], [0, 0, 1, 1, 0, 1])
        keep = random_downsample(graph, SamplingSpec("random", seed=1))
        assert keep.tolist() == graph.node_ids.tolist()

    def test_expected_bad_count(self, german_graph):
        over = german_graph.sensitive == GROUP_OVER
        bad_over = set(german_graph.node_ids[over & (german_graph.labels == LABEL_BAD)])
        kept_bad = []
        for seed in range(1000):
            keep = random_downsample(german_graph, SamplingSpec("random", seed=seed))
            kept_bad.append(len(bad_over.intersection(keep.tolist())))
        assert np.mean(kept_bad) == pytest.approx(310 * 191 / 690, abs=3)

    def test_deterministic(self, german_graph):
        spec = SamplingSpec("random", seed=11)
        np.testing.assert_array_equal(
            random_downsample(german_graph, spec), random_downsample(german_graph, spec)
        )


class TestStratifiedSampling:
    """Per-label downsampling to the underrepresented cell sizes."""

    def test_german_cells_every_seed(self, german_graph):
        for seed in range(1000):
            spec = SamplingSpec("stratified", seed=seed)
            keep = stratified_downsample(german_graph, spec)
            counts = kept_counts(german_graph, keep)
            assert (counts.over, counts.under) == (310, 310)
            assert counts.cell(GROUP_OVER, LABEL_BAD) == 109
            assert counts.cell(GROUP_UNDER, LABEL_BAD) == 109
            assert counts.cell(GROUP_OVER, LABEL_GOOD) == 201
            assert counts.cell(GROUP_UNDER, LABEL_GOOD) == 201

    def test_mirrored_is_identity(self, make_graph):
        graph = make_graph([0, 0, 0, 1, 1, 1], [0, 1, 1, 0, 1, 1])
        keep = stratified_downsample(graph, SamplingSpec("stratified"))
        assert keep.tolist() == graph.node_ids.tolist()

    def test_small_over_cell(self, make_graph):
        graph = make_graph([0, 0, 0, 1, 1], [1, 1, 1, 0, 0])
        with pytest.raises(SamplingError, match="label 0"):
            stratified_downsample(graph, SamplingSpec("stratified"))

    def test_every_selection_reachable(self, make_graph):
        graph = make_graph([0] * 8 + [1] * 4, [0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1])
        bad_picks, good_picks = set(), set()
        for seed in range(1000):
            spec = SamplingSpec("stratified", seed=seed)
            keep = set(stratified_downsample(graph, spec).tolist())
            bad_picks.add(frozenset(keep & {0, 1, 2, 3}))
            good_picks.add(frozenset(keep & {4, 5, 6, 7}))
        assert bad_picks == {frozenset(pair) for pair in combinations([0, 1, 2, 3], 2)}
        assert good_picks == {frozenset(pair) for pair in combinations([4, 5, 6, 7], 2)}


class TestWeightedSampling:
    """Inverse cell-frequency weighted downsampling."""

    def test_german_groups(self, german_graph):
        keep = weighted_downsample(german_graph, SamplingSpec("weighted", seed=5))
        counts = kept_counts(german_graph, keep)
        assert (counts.over, counts.under) == (310, 310)

    def test_favours_minority_label(self, german_graph):
        fractions = []
        for seed in range(200):
            spec = SamplingSpec("weighted", seed=seed)
            keep = weighted_downsample(german_graph, spec)
            counts = kept_counts(german_graph, keep)
            fractions.append(counts.cell(GROUP_OVER, LABEL_BAD) / counts.over)
        assert np.mean(fractions) > 191 / 690

    def test_no_duplicates(self, german_graph):
        keep = weighted_downsample(german_graph, SamplingSpec("weighted", seed=9))
        assert len(np.unique(keep)) == len(keep) == 620

    def test_minority_label_kept_more_often(self, make_graph):
        # 4 bad and 16 good overrepresented nodes, target 10.
        graph = make_graph([0] * 20 + [1] * 10, [0] * 4 + [1] * 16 + [0, 1] * 5)
        bad = set(range(4))
        kept_bad = []
        for seed in range(2000):
            keep = weighted_downsample(graph, SamplingSpec("weighted", seed=seed))
            kept_bad.append(len(bad.intersection(keep.tolist())))
        assert np.mean(kept_bad) > 2.0

    def test_equal_cells_match_uniform(self, make_graph):
        graph = make_graph([0] * 20 + [1] * 10, [0] * 10 + [1] * 10 + [0, 1] * 5)
        weighted_hits = np.zeros(20)
        random_hits = np.zeros(20)
        for seed in range(2000):
            spec = SamplingSpec("weighted", seed=seed)
            weighted_hits[weighted_downsample(graph, spec)[:10]] += 1
            kept = random_downsample(graph, SamplingSpec("random", seed=seed))
            random_hits[kept[:10]] += 1
        np.testing.assert_allclose(weighted_hits / 2000, 0.5, atol=0.05)
        np.testing.assert_allclose(random_hits / 2000, 0.5, atol=0.05)
        assert weighted_hits[:10].sum() / 2000 == pytest.approx(5.0, abs=0.15)


class TestSparsify:
    """Induced subgraph of the sampled ids."""

    def test_edges_restricted(self, make_graph):
        graph = make_graph(
            [0, 0, 0, 1], [0, 1, 1, 0], edges=[(0, 1), (1, 2), (2, 3), (0, 3)]
        )
        result = sparsify(graph, SamplingSpec("random", seed=0))
        kept = set(result.node_ids.tolist())
        assert len(kept) == 2
        for a, b in result.edges.tolist():
            assert a in kept and b in kept
        expected = [e for e in graph.edges.tolist() if e[0] in kept and e[1] in kept]
        assert result.edges.tolist() == expected
