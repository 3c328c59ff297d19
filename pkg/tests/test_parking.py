"""Parking process: flux recursion, sequential oracle, line parking."""

import itertools
import math

import pytest

from treepark.parking import (
    Arrivals,
    InvalidNode,
    PrefOutOfRange,
    SizeMismatch,
    SizeTooLarge,
    compute_flux,
    count_line_parking_functions,
    flux_kernel_counts,
    is_line_parking_function,
    multinomial_arrivals,
    path_tree,
    poisson_arrivals,
    simulate_sequential,
)
from treepark.rng import LANE_ARRIVAL, Stream, derive_key
from treepark.tree import SamplerConfig, enumerate_trees, sample_bgw_tree, tree_from_fields
from treepark.validate import (
    check_flux_monotonicity,
    check_order_invariance,
    konheim_weiss_table,
)


def _arrival_stream(seed, index=0):
    return Stream(derive_key(seed, index, LANE_ARRIVAL))


class TestComputeFlux:
    def test_single_node_empty(self):
        fr = compute_flux(tree_from_fields([0]), Arrivals([0]))
        assert (fr.root_visits, fr.flux, fr.parked, fr.exited) == (0, 0, 0, 0)
        assert fr.all_parked

    def test_single_node_three_cars(self):
        fr = compute_flux(tree_from_fields([0]), Arrivals([3]))
        assert (fr.root_visits, fr.flux, fr.parked, fr.exited) == (3, 2, 1, 2)

    def test_three_node_example_against_sequential(self):
        # root with two leaf children; cars: 1 at root, 2 at the left leaf
        t = tree_from_fields([3, 0, 0])
        arr = Arrivals([1, 2, 0])
        fr = compute_flux(t, arr)
        # left leaf overflows one car; root sees its own car plus that one
        assert fr.root_visits == 2
        assert fr.flux == 1
        seq, _ = simulate_sequential(t, [(0, 0), (1, 1), (2, 1)])
        assert (fr.root_visits, fr.flux, fr.parked, fr.exited) == (
            seq.root_visits,
            seq.flux,
            seq.parked,
            seq.exited,
        )
        assert fr.occupancy == seq.occupancy == [1, 1, 0]

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            compute_flux(tree_from_fields([0]), Arrivals([1, 2]))

    def test_matches_kernel_reverse_pass(self):
        cfg = SamplerConfig(seed=21, max_nodes=10_000)
        from treepark.rng import LANE_STRUCTURE

        for i in range(200):
            t = sample_bgw_tree(cfg, Stream(derive_key(21, i, LANE_STRUCTURE)))
            if hasattr(t, "partial"):
                t = t.partial
            arr = poisson_arrivals(t, 0.8, _arrival_stream(21, i))
            fr = compute_flux(t, arr)
            assert (fr.root_visits, fr.parked) == flux_kernel_counts(t, arr)

    def test_conservation_and_flags(self):
        cfg = SamplerConfig(seed=22, max_nodes=10_000)
        from treepark.rng import LANE_STRUCTURE

        for i in range(300):
            t = sample_bgw_tree(cfg, Stream(derive_key(22, i, LANE_STRUCTURE)))
            if hasattr(t, "partial"):
                continue
            arr = poisson_arrivals(t, 0.6, _arrival_stream(22, i))
            fr = compute_flux(t, arr)
            assert fr.parked + fr.exited == arr.total
            assert fr.exited == fr.flux
            assert fr.parked == sum(fr.occupancy)
            assert fr.all_parked == (fr.root_visits <= 1)


class TestSequentialSimulator:
    def test_one_car_parks_at_root(self):
        fr, recs = simulate_sequential(tree_from_fields([0]), [(0, 0)])
        assert fr.flux == 0 and fr.parked == 1
        assert recs[0].parked_at == 0

    def test_two_cars_walk_up(self):
        # leaf under the root: first car takes the leaf, second the root
        t = tree_from_fields([1, 0])
        fr, recs = simulate_sequential(t, [(0, 1), (1, 1)])
        assert fr.flux == 0
        assert recs[0].parked_at == 1
        assert recs[1].parked_at == 0
        # parked node lies on the path from start to root
        assert all(r.parked_at in (0, 1) for r in recs)

    def test_exit_records_none(self):
        fr, recs = simulate_sequential(tree_from_fields([0]), [(0, 0), (1, 0)])
        assert fr.exited == 1
        assert recs[1].parked_at is None

    def test_all_orders_agree_on_example(self):
        t = tree_from_fields([3, 0, 0])
        cars = [0, 1, 1]  # one car at root, two at left leaf
        results = set()
        for perm in set(itertools.permutations(cars)):
            fr, _ = simulate_sequential(t, list(enumerate(perm)))
            results.add((fr.root_visits, fr.flux, fr.parked, tuple(fr.occupancy)))
        assert results == {(2, 1, 2, (1, 1, 0))}

    def test_invalid_start(self):
        with pytest.raises(InvalidNode):
            simulate_sequential(tree_from_fields([0]), [(0, 5)])


class TestArrivalSamplers:
    def test_poisson_zero_rate(self):
        t = tree_from_fields([1, 1, 0])
        arr = poisson_arrivals(t, 0.0, _arrival_stream(23))
        assert arr.counts == [0, 0, 0]
        assert arr.total == 0

    def test_poisson_mean_and_zero_prob(self):
        t, _ = enumerate_trees(1)[0]
        n = 300_000
        counts = []
        st = _arrival_stream(24)
        for _ in range(n):
            counts.append(poisson_arrivals(t, 0.3, st).counts[0])
        mean = sum(counts) / n
        assert abs(mean - 0.3) < 3 * math.sqrt(0.3 / n)
        p0 = sum(1 for c in counts if c == 0) / n
        exact = math.exp(-0.3)  # = 0.740818...
        assert abs(p0 - exact) < 3 * math.sqrt(exact * (1 - exact) / n)

    def test_multinomial_edges(self):
        t1, _ = enumerate_trees(1)[0]
        assert multinomial_arrivals(t1, 0, _arrival_stream(25)).counts == [0]
        assert multinomial_arrivals(t1, 5, _arrival_stream(25)).counts == [5]

    def test_multinomial_two_nodes_balanced(self):
        t = tree_from_fields([1, 0])
        n = 100_000
        st = _arrival_stream(26)
        first = sum(multinomial_arrivals(t, 1, st).counts[0] for _ in range(n))
        se = math.sqrt(0.25 / n)
        assert abs(first / n - 0.5) < 3 * se

    def test_arrivals_csv(self):
        text = Arrivals([2, 0, 1]).to_csv()
        assert text.splitlines()[0] == "node_index,count"
        assert text.splitlines()[2] == "1,0"


class TestLineParking:
    def test_examples(self):
        assert is_line_parking_function([1], 1) is True
        assert is_line_parking_function([2, 2], 2) is True
        assert is_line_parking_function([2, 2, 2], 2) is False
        # overflow from space 1 exits: space 1 is the root
        assert is_line_parking_function([1, 1], 2) is False

    def test_pref_out_of_range(self):
        with pytest.raises(PrefOutOfRange):
            is_line_parking_function([3], 2)

    def test_counts_small(self):
        assert count_line_parking_functions(1, 1) == (1, 1)
        assert count_line_parking_functions(2, 2) == (3, 3)
        assert count_line_parking_functions(3, 3) == (16, 16)

    def test_counts_agree_up_to_5(self):
        for _n, _m, brute, formula in konheim_weiss_table(5):
            assert brute == formula

    def test_size_guard(self):
        with pytest.raises(SizeTooLarge):
            count_line_parking_functions(8, 3)

    def test_path_tree_agrees_with_line_definition(self):
        for n in range(1, 6):
            pt = path_tree(n)
            pt.validate()
            for m in range(1, n + 1):
                for prefs in itertools.product(range(1, n + 1), repeat=m):
                    counts = [0] * n
                    for p in prefs:
                        counts[p - 1] += 1
                    fr = compute_flux(pt, Arrivals(counts))
                    assert fr.all_parked == is_line_parking_function(list(prefs), n)


class TestProperties:
    def test_order_invariance_desk(self):
        cases, orders = check_order_invariance(4, 3)
        assert cases > 0 and orders >= cases

    def test_monotonicity_desk(self):
        assert check_flux_monotonicity(4, 3) > 0

    def test_flux_summary_json(self):
        fr = compute_flux(tree_from_fields([0]), Arrivals([3]))
        import json

        d = json.loads(fr.summary_json())
        assert d == {"root_visits": 3, "flux": 2, "parked": 1, "exited": 2}
