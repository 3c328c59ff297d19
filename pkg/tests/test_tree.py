"""Tree samplers, enumeration and spine segments."""

import math
from fractions import Fraction

import pytest

from treepark.rng import LANE_STRUCTURE, Stream, derive_key
from treepark.tree import (
    BinaryTree,
    InvalidTree,
    RejectionLimitExceeded,
    SamplerConfig,
    SizeTooLarge,
    Truncated,
    build_spine_segment,
    enumerate_trees,
    sample_bgw_tree,
    sample_uniform_tree,
    tree_from_fields,
)
from treepark.validate import check_cycle_lemma_uniqueness, uniformity_chi_square

CATALAN = [1, 1, 2, 5, 14, 42, 132, 429]


def _structure_stream(seed, index=0):
    return Stream(derive_key(seed, index, LANE_STRUCTURE))


class TestEnumeration:
    def test_counts_match_catalan(self):
        for n in range(1, 8):
            assert len(enumerate_trees(n)) == CATALAN[n]

    def test_single_node(self):
        trees = enumerate_trees(1)
        assert len(trees) == 1
        t, w = trees[0]
        assert t.n == 1 and t.is_leaf(0)
        assert w == Fraction(1, 4)

    def test_two_nodes_left_and_right(self):
        keys = sorted(t.shape_key() for t, _ in enumerate_trees(2))
        assert keys == [(1, 0), (2, 0)]  # left-child-only, right-child-only

    def test_three_nodes_all_weights_equal(self):
        trees = enumerate_trees(3)
        assert len(trees) == 5
        assert all(w == Fraction(1, 64) for _t, w in trees)

    def test_trees_valid_and_distinct(self):
        for n in range(1, 7):
            seen = set()
            for t, _w in enumerate_trees(n):
                t.validate()
                assert t.n == n
                key = t.shape_key()
                assert key not in seen
                seen.add(key)

    def test_size_guard(self):
        with pytest.raises(SizeTooLarge):
            enumerate_trees(13)


class TestBgwSampler:
    def test_single_node_tree_occurs(self):
        # the leaf draw (no children) has probability 1/4
        cfg = SamplerConfig(seed=0)
        for i in range(50):
            t = sample_bgw_tree(cfg, _structure_stream(0, i))
            if not isinstance(t, Truncated) and t.n == 1:
                assert t.child_count(0) == 0
                return
        pytest.fail("no single-node tree in 50 draws")

    def test_sampled_trees_are_valid(self):
        cfg = SamplerConfig(seed=1, max_nodes=50_000)
        for i in range(300):
            t = sample_bgw_tree(cfg, _structure_stream(1, i))
            if isinstance(t, Truncated):
                t = t.partial
            t.validate()

    def test_offspring_histogram(self):
        # Bin(2, 1/2): probabilities (1/4, 1/2, 1/4), within 3 standard errors
        cfg = SamplerConfig(seed=2, max_nodes=100_000)
        hist = [0, 0, 0]
        nodes = 0
        i = 0
        while nodes < 100_000:
            t = sample_bgw_tree(cfg, _structure_stream(2, i))
            i += 1
            if isinstance(t, Truncated):
                continue
            for v in range(t.n):
                hist[t.child_count(v)] += 1
            nodes += t.n
        for k, prob in ((0, 0.25), (1, 0.5), (2, 0.25)):
            se = math.sqrt(prob * (1 - prob) / nodes)
            assert abs(hist[k] / nodes - prob) < 3 * se

    def test_size_pmf_matches_enumeration(self):
        # P(size = k) for k <= 6 against the exact enumeration weights.  A
        # cap of 7 computes the identical statistic (any tree reaching 7
        # generated nodes has size > 6 whether or not it completes).
        cfg = SamplerConfig(seed=3, max_nodes=7)
        ntrees = 100_000
        counts = [0] * 7
        for i in range(ntrees):
            t = sample_bgw_tree(cfg, _structure_stream(3, i))
            if isinstance(t, Truncated):
                continue
            if t.n <= 6:
                counts[t.n] += 1
        for k in range(1, 7):
            exact = CATALAN[k] / 4**k
            se = math.sqrt(exact * (1 - exact) / ntrees)
            assert abs(counts[k] / ntrees - exact) < 3 * se

    def test_truncated_mean_size_matches_enumeration(self):
        # E[size * 1{size <= 12}] from sampling vs the exact enumeration
        # sum.  Sizes above 12 contribute zero, so capping generation at 13
        # nodes yields the same estimator at a fraction of the cost.
        exact = sum(k * CATALAN[k] / 4**k for k in range(1, 8))
        exact += sum(k * len(enumerate_trees(k)) / 4**k for k in range(8, 13))
        cfg = SamplerConfig(seed=4, max_nodes=13)
        ntrees = 100_000
        total = 0
        total_sq = 0
        for i in range(ntrees):
            t = sample_bgw_tree(cfg, _structure_stream(4, i))
            size = t.nodes_generated if isinstance(t, Truncated) else t.n
            val = size if size <= 12 else 0
            total += val
            total_sq += val * val
        mean = total / ntrees
        se = math.sqrt((total_sq / ntrees - mean**2) / ntrees)
        assert abs(mean - exact) < 3 * se

    def test_truncation_marker(self):
        cfg = SamplerConfig(seed=5, max_nodes=4)
        saw = False
        for i in range(100):
            t = sample_bgw_tree(cfg, _structure_stream(5, i))
            if isinstance(t, Truncated):
                saw = True
                assert t.nodes_generated == 4
                assert t.partial.n == 4
                t.partial.validate()
        assert saw


class TestUniformSampler:
    def test_n1_always_single_node(self):
        cfg = SamplerConfig(seed=6)
        for i in range(20):
            t = sample_uniform_tree(1, cfg, _structure_stream(6, i))
            assert t.n == 1

    def test_n2_both_shapes_equally(self):
        cfg = SamplerConfig(seed=7)
        counts = {(1, 0): 0, (2, 0): 0}
        draws = 20_000
        for i in range(draws):
            t = sample_uniform_tree(2, cfg, _structure_stream(7, i))
            counts[t.shape_key()] += 1
        se = math.sqrt(0.25 / draws)
        assert abs(counts[(1, 0)] / draws - 0.5) < 3 * se

    def test_n4_uniform_chi_square(self):
        stat, crit = uniformity_chi_square(4, 20_000, seed=8)
        assert stat < crit

    def test_exact_size_and_validity(self):
        cfg = SamplerConfig(seed=9)
        for n in (1, 2, 3, 5, 17, 64, 200):
            t = sample_uniform_tree(n, cfg, _structure_stream(9, n))
            assert t.n == n
            t.validate()

    def test_rejection_limit(self):
        cfg = SamplerConfig(seed=10, rejection_limit=1)
        raised = 0
        for i in range(30):
            try:
                sample_uniform_tree(40, cfg, _structure_stream(10, i))
            except RejectionLimitExceeded:
                raised += 1
        assert raised > 0

    def test_cycle_lemma_unique_rotation(self):
        for n in (2, 3, 4, 5, 6):
            check_cycle_lemma_uniqueness(n, 400, seed=11)


class TestSpineSegment:
    def test_forced_no_attachments(self):
        cfg = SamplerConfig(seed=12)
        for i in range(200):
            seg = build_spine_segment(1, cfg, _structure_stream(12, i))
            if isinstance(seg, Truncated):
                continue
            if all(a is None for a in seg.attached):
                assert seg.depth == 1
                assert len(seg.spine) == 2
                return
        pytest.fail("no attachment-free segment found")

    def test_hanger_rate_and_mean(self):
        # P(1 hanger) = 1/2; the mean equals the branching variance 1/2.
        # Replays the spine protocol per vertex: the hanger coin is drawn
        # before its tree, so counting every coin is unbiased even when the
        # tree draw truncates (a small cap keeps this cheap), whereas
        # discarding truncated segments would condition against hangers.
        cfg = SamplerConfig(seed=13, max_nodes=1000)
        st = _structure_stream(13)
        vertices = 100_000
        hangers = 0
        for _ in range(vertices):
            if st.next_bit():
                hangers += 1
                sample_bgw_tree(cfg, st)
        rate = hangers / vertices
        se = math.sqrt(0.25 / vertices)
        assert abs(rate - 0.5) < 3 * se
        # with hangers in {0, 1}, the empirical mean is the same statistic
        assert abs(hangers / vertices - 0.5) < 3 * se

    def test_segment_structure(self):
        cfg = SamplerConfig(seed=17, max_nodes=100_000)
        seg = None
        for i in range(50):
            seg = build_spine_segment(20, cfg, _structure_stream(17, i))
            if not isinstance(seg, Truncated):
                break
        assert not isinstance(seg, Truncated)
        assert seg.depth == 20
        assert len(seg.attached) == 21
        assert seg.spine == list(range(21))
        for a in seg.attached:
            if a is not None:
                a.validate()

    def test_truncation_propagates(self):
        cfg = SamplerConfig(seed=14, max_nodes=3)
        saw = False
        for i in range(100):
            seg = build_spine_segment(30, cfg, _structure_stream(14, i))
            if isinstance(seg, Truncated):
                saw = True
        assert saw


class TestBinaryTreeType:
    def test_validate_rejects_bad_parent(self):
        t = BinaryTree(parent=[-1, 0], left=[1, -1], right=[-1, -1])
        t.validate()
        bad = BinaryTree(parent=[-1, -1], left=[1, -1], right=[-1, -1])
        with pytest.raises(InvalidTree):
            bad.validate()

    def test_validate_rejects_cycle(self):
        bad = BinaryTree(parent=[-1, 2, 1], left=[-1, 2, 1], right=[-1, -1, -1])
        with pytest.raises(InvalidTree):
            bad.validate()

    def test_csv_round_trip(self):
        t = sample_uniform_tree(9, SamplerConfig(seed=15))
        text = t.to_csv()
        assert text.splitlines()[0] == "index,parent,left,right"
        assert text.splitlines()[1].startswith("0,-1,")
        assert BinaryTree.from_csv(text) == t

    def test_fields_round_trip(self):
        for n in range(1, 6):
            for t, _w in enumerate_trees(n):
                assert tree_from_fields(list(t.shape_key())) == t

    def test_incomplete_fields_rejected(self):
        with pytest.raises(InvalidTree):
            tree_from_fields([3, 0])  # promises two children, delivers one


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(max_nodes=0)
    with pytest.raises(ValueError):
        SamplerConfig(rejection_limit=0)
