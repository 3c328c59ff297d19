"""Cross-backend equivalence: compiled kernels vs pure Python vs object layer.

The compiled and pure kernels implement the same draw protocol, so their
outputs must agree bit for bit.  Independently, composing the public
object-layer operations (tree sampler + arrivals + flux) with the same
streams must reproduce the fused kernel trials exactly.
"""

import math

import pytest

import treepark
from treepark import _kernels_py
from treepark._backend import get_kernels
from treepark.parking import compute_flux, multinomial_arrivals, poisson_arrivals
from treepark.rng import LANE_ARRIVAL, LANE_STRUCTURE, Stream, derive_key
from treepark.tree import SamplerConfig, Truncated, sample_bgw_tree, sample_uniform_tree

compiled = pytest.mark.skipif(
    treepark.backend_name() != "cython", reason="compiled kernels unavailable"
)

kc = get_kernels()
kp = get_kernels(pure=True)


@compiled
def test_stream_sequences_match():
    for key in (0, 1, 12345, 2**64 - 1, derive_key(9, 9, 2)):
        st = Stream(key)
        assert kc.stream_u64_sequence(key, 50) == [st.next_u64() for _ in range(50)]


@compiled
@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_flux_trial_bit_identity(alpha):
    for i in range(300):
        assert kc.flux_trial_detail(77, i, alpha, 10**5) == kp.flux_trial_detail(
            77, i, alpha, 10**5
        )


@compiled
def test_flux_pmf_range_bit_identity():
    assert kc.flux_pmf_range(7, 0, 1500, 0.3, 10**5, 12) == kp.flux_pmf_range(
        7, 0, 1500, 0.3, 10**5, 12
    )


@compiled
def test_parking_bit_identity():
    assert kc.parking_range(3, 0, 400, 40, 12, 1000) == kp.parking_range(
        3, 0, 400, 40, 12, 1000
    )
    for i in range(60):
        assert kc.parking_trial_detail(3, i, 33, 9, 1000) == kp.parking_trial_detail(
            3, i, 33, 9, 1000
        )


@compiled
def test_spine_y_ruin_bit_identity():
    assert kc.spine_range(5, 0, 40, 0.3, 150, 5000, 2) == kp.spine_range(
        5, 0, 40, 0.3, 150, 5000, 2
    )
    assert kc.y_stats_range(5, 0, 2500, 0.4, 10**4) == kp.y_stats_range(
        5, 0, 2500, 0.4, 10**4
    )
    assert kc.ruin_range(5, 0, 3000, 0.7, 500) == kp.ruin_range(5, 0, 3000, 0.7, 500)


def _object_flux_trial(seed, index, alpha, max_nodes):
    """Replay one fused flux trial through the public object layer."""
    cfg = SamplerConfig(seed=seed, max_nodes=max_nodes)
    ss = Stream(derive_key(seed, index, LANE_STRUCTURE))
    as_ = Stream(derive_key(seed, index, LANE_ARRIVAL))
    t = sample_bgw_tree(cfg, ss)
    truncated = isinstance(t, Truncated)
    if truncated:
        t = t.partial
    arrivals = poisson_arrivals(t, alpha, as_)
    fr = compute_flux(t, arrivals)
    return fr.root_visits, t.n, fr.parked, arrivals.total, truncated


@pytest.mark.parametrize("alpha", [0.3, 1.0])
def test_object_layer_matches_kernel_flux(alpha):
    for i in range(250):
        assert _object_flux_trial(42, i, alpha, 10**5) == kc.flux_trial_detail(
            42, i, alpha, 10**5
        )


def test_object_layer_matches_kernel_on_clipped_trees():
    # A tiny cap forces truncation on most trials; the clipped-tree flux of
    # the object layer must equal the kernel's in-place clipped computation.
    cap = 8
    hits = 0
    for i in range(200):
        got = _object_flux_trial(1234, i, 0.5, cap)
        assert got == kc.flux_trial_detail(1234, i, 0.5, cap)
        if got[4]:
            hits += 1
            assert got[1] == cap
    assert hits > 0


def test_object_layer_matches_kernel_parking():
    n, m = 25, 10
    for i in range(150):
        detail = kc.parking_trial_detail(55, i, n, m, 10_000)
        assert detail is not None
        visits, parked, _attempts = detail
        cfg = SamplerConfig(seed=55)
        ss = Stream(derive_key(55, i, LANE_STRUCTURE))
        as_ = Stream(derive_key(55, i, LANE_ARRIVAL))
        t = sample_uniform_tree(n, cfg, ss)
        fr = compute_flux(t, multinomial_arrivals(t, m, as_))
        assert (fr.root_visits, fr.parked) == (visits, parked)


def test_object_layer_spine_walk_matches_kernel():
    """Replay whole spine survival trials with object-layer pieces."""
    seed, alpha, depth, cap = 31, 0.3, 60, 5000
    exp_neg = math.exp(-alpha)
    for i in range(40):
        ss = Stream(derive_key(seed, i, LANE_STRUCTURE))
        as_ = Stream(derive_key(seed, i, LANE_ARRIVAL))
        cfg = SamplerConfig(seed=seed, max_nodes=cap)
        position = 0
        alive = True
        for _h in range(1, depth + 1):
            has_tree = ss.next_bit()
            y = as_.poisson(exp_neg)
            if has_tree:
                t = sample_bgw_tree(cfg, ss)
                if isinstance(t, Truncated):
                    t = t.partial
                fr = compute_flux(t, poisson_arrivals(t, alpha, as_))
                y += fr.flux
            position += 1 - y
            if position < 0:
                alive = False
                break
        kernel_alive, _ext, _ev, _tr = kc.spine_range(seed, i, i + 1, alpha, depth, cap, 1)
        assert kernel_alive == (1 if alive else 0)
