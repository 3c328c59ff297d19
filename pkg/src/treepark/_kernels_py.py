"""Pure-Python simulation kernels.

This module is the reference implementation of the Monte Carlo trial
protocols.  ``treepark._kernels`` (Cython) implements the same functions
with the same draw-for-draw use of the random streams, so the two backends
return bit-identical results; the test suite relies on that.  The pure
versions are one to three orders of magnitude slower and exist as the
fallback when the compiled extension is unavailable.

Trial protocol
--------------
Every trial with index ``i`` under master seed ``s`` uses two streams:

* structure lane: ``Stream(derive_key(s, i, LANE_STRUCTURE))``
* arrival lane:   ``Stream(derive_key(s, i, LANE_ARRIVAL))``

Tree structure is encoded as two-bit child fields (bit 0 = left child
present, bit 1 = right child present; each bit is an independent fair
coin, which is exactly the Bin(2, 1/2) offspring law with uniform side
choice for single children).  Fields are consumed in depth-first preorder,
left child before right.  Arrival counts are Poisson draws consumed in the
same preorder.  The conditioned (fixed-size) sampler draws whole 64-bit
words of packed fields and accepts when the popcount equals n - 1, then
applies the cycle-lemma rotation.

Truncation: unconditioned tree growth stops at ``max_nodes`` generated
nodes.  The trial is then flagged and the parking flux is computed on the
clipped tree (ungrown subtrees treated as absent), which can only lower
visit counts; callers surface the flag so the bias stays observable.
"""

from __future__ import annotations

import math

from .rng import LANE_ARRIVAL, LANE_STRUCTURE, Stream, derive_key

_POPC2 = (0, 1, 1, 2)

_TWO64 = 18446744073709551616.0  # 2.0 ** 64


def _streams(seed: int, index: int) -> tuple[Stream, Stream]:
    return (
        Stream(derive_key(seed, index, LANE_STRUCTURE)),
        Stream(derive_key(seed, index, LANE_ARRIVAL)),
    )


def bgw_preorder_fields(stream: Stream, max_nodes: int) -> tuple[list[int], bool]:
    """Preorder child fields of one BGW(2,1/2) tree (structure lane only).

    Returns (fields, truncated).  Generation is the killed Lukasiewicz
    walk: ``pending`` counts promised-but-ungenerated nodes.
    """
    fields: list[int] = []
    pending = 1
    while pending > 0 and len(fields) < max_nodes:
        f = stream.next_two_bits()
        fields.append(f)
        pending += _POPC2[f] - 1
    return fields, pending > 0


def flux_from_preorder(child_counts, arrivals) -> tuple[int, int]:
    """Root visits and parked count from preorder child counts + arrivals.

    Single reverse pass with an explicit stack; each node absorbs the
    overflow ``(x - 1)^+`` of its children.  If the preorder is a clipped
    prefix (truncated tree), missing children simply contribute nothing,
    which is exactly the flux of the clipped tree.
    """
    stack: list[int] = []
    parked = 0
    for i in range(len(child_counts) - 1, -1, -1):
        x = arrivals[i]
        k = child_counts[i]
        if k > len(stack):
            k = len(stack)
        for _ in range(k):
            child = stack.pop()
            if child > 1:
                x += child - 1
        if x >= 1:
            parked += 1
        stack.append(x)
    return stack[-1], parked


def _flux_trial(ss: Stream, as_: Stream, exp_neg_alpha: float, max_nodes: int):
    """One fused BGW + Poisson-arrivals + flux trial.

    Returns (root_visits, n_nodes, parked, total_arrivals, truncated).
    """
    counts: list[int] = []
    arrivals: list[int] = []
    total = 0
    pending = 1
    while pending > 0 and len(counts) < max_nodes:
        c = _POPC2[ss.next_two_bits()]
        a = as_.poisson(exp_neg_alpha)
        counts.append(c)
        arrivals.append(a)
        total += a
        pending += c - 1
    truncated = pending > 0
    visits, parked = flux_from_preorder(counts, arrivals)
    return visits, len(counts), parked, total, truncated


def flux_trial_detail(seed: int, index: int, alpha: float, max_nodes: int):
    """Single flux trial with full detail, for cross-backend testing."""
    ss, as_ = _streams(seed, index)
    return _flux_trial(ss, as_, math.exp(-alpha), max_nodes)


def flux_pmf_range(seed, start, stop, alpha, max_nodes, kmax):
    """Histogram of root visits over trials [start, stop).

    Returns (counts[0..kmax], above_kmax, truncated_trials).  Truncated
    trials still contribute their clipped-tree visit count to the bins.
    """
    exp_neg = math.exp(-alpha)
    counts = [0] * (kmax + 1)
    above = 0
    truncated = 0
    for i in range(start, stop):
        ss, as_ = _streams(seed, i)
        visits, _, _, _, trunc = _flux_trial(ss, as_, exp_neg, max_nodes)
        if trunc:
            truncated += 1
        if visits <= kmax:
            counts[visits] += 1
        else:
            above += 1
    return counts, above, truncated


def uniform_offspring_fields(stream: Stream, n: int, rejection_limit: int):
    """Child fields of a uniform positioned binary tree with n nodes.

    Draws packed 64-bit words of two-bit fields, rejects until the total
    child count (the popcount) is n - 1, then rotates the sequence to the
    unique cyclic shift that is a valid preorder (cycle lemma: start just
    after the first minimum of the prefix-sum walk).

    Returns (fields, attempts); fields is None when the rejection limit
    was exhausted.
    """
    nwords = (n + 31) >> 5
    rem = n - ((nwords - 1) << 5)
    last_mask = (1 << (2 * rem)) - 1
    target = n - 1
    for attempt in range(1, rejection_limit + 1):
        words = [stream.next_u64() for _ in range(nwords)]
        words[-1] &= last_mask
        total = 0
        for w in words:
            total += w.bit_count()
        if total != target:
            continue
        fields = [(words[i >> 5] >> ((i & 31) << 1)) & 3 for i in range(n)]
        # Cycle lemma rotation: first attainment of the prefix-sum minimum.
        s = 0
        best = 1
        pos = 0
        for j in range(n):
            s += _POPC2[fields[j]] - 1
            if s < best:
                best = s
                pos = j
        start_at = (pos + 1) % n
        if start_at:
            fields = fields[start_at:] + fields[:start_at]
        return fields, attempt
    return None, rejection_limit


def _multinomial(as_: Stream, n: int, m: int) -> list[int]:
    counts = [0] * n
    for _ in range(m):
        counts[as_.randbelow(n)] += 1
    return counts


def parking_trial_detail(seed, index, n, m, rejection_limit):
    """Single fixed-size parking trial: (root_visits, parked, attempts) or None."""
    ss, as_ = _streams(seed, index)
    fields, attempts = uniform_offspring_fields(ss, n, rejection_limit)
    if fields is None:
        return None
    arrivals = _multinomial(as_, n, m)
    visits, parked = flux_from_preorder([_POPC2[f] for f in fields], arrivals)
    return visits, parked, attempts


def parking_range(seed, start, stop, n, m, rejection_limit):
    """All-cars-park successes on uniform n-node trees over [start, stop).

    Returns (successes, rejection_failures).  A trial whose conditioned
    sampler exhausts the rejection limit counts as a failure and is
    reported separately.
    """
    successes = 0
    failures = 0
    for i in range(start, stop):
        out = parking_trial_detail(seed, i, n, m, rejection_limit)
        if out is None:
            failures += 1
        elif out[0] <= 1:
            successes += 1
    return successes, failures


def _y_draw(ss, as_, exp_neg_alpha, tree_max_nodes):
    """One spine-vertex load: own Poisson arrivals plus, with probability
    1/2, the overflow of a fresh parked BGW tree.  Returns (y, truncated).
    """
    has_tree = ss.next_bit()
    y = as_.poisson(exp_neg_alpha)
    truncated = False
    if has_tree:
        visits, _, _, _, truncated = _flux_trial(ss, as_, exp_neg_alpha, tree_max_nodes)
        if visits > 1:
            y += visits - 1
    return y, truncated


def y_stats_range(seed, start, stop, alpha, tree_max_nodes):
    """Moments of the spine-vertex load Y over trials [start, stop).

    Returns (sum_y, sum_y_sq, zeros, truncated_trees).
    """
    exp_neg = math.exp(-alpha)
    sum_y = 0
    sum_sq = 0
    zeros = 0
    truncated = 0
    for i in range(start, stop):
        ss, as_ = _streams(seed, i)
        y, trunc = _y_draw(ss, as_, exp_neg, tree_max_nodes)
        sum_y += y
        sum_sq += y * y
        if y == 0:
            zeros += 1
        if trunc:
            truncated += 1
    return sum_y, sum_sq, zeros, truncated


def spine_range(seed, start, stop, alpha, depth, tree_max_nodes, check_factor):
    """Spine-parking survival walks over trials [start, stop).

    One walk per trial: position moves by 1 - Y each step and the walk
    survives while it stays nonnegative.  Runs to depth * check_factor
    steps; returns (alive_at_depth, alive_at_extended, truncated_tree_events,
    trials_with_truncation).
    """
    exp_neg = math.exp(-alpha)
    horizon = depth * check_factor
    alive_main = 0
    alive_ext = 0
    trunc_events = 0
    trunc_trials = 0
    for i in range(start, stop):
        ss, as_ = _streams(seed, i)
        position = 0
        died_at = 0
        trial_truncs = 0
        for h in range(1, horizon + 1):
            y, trunc = _y_draw(ss, as_, exp_neg, tree_max_nodes)
            if trunc:
                trial_truncs += 1
            position += 1 - y
            if position < 0:
                died_at = h
                break
        trunc_events += trial_truncs
        if trial_truncs:
            trunc_trials += 1
        if died_at == 0:
            alive_main += 1
            alive_ext += 1
        elif died_at > depth:
            alive_main += 1
    return alive_main, alive_ext, trunc_events, trunc_trials


def ruin_range(seed, start, stop, q, depth):
    """Never-negative +/-1 walks with up-step probability q.

    Returns a 1-tuple: the number of walks staying nonnegative for
    ``depth`` steps.  Uses the structure lane of each trial's stream pair.
    """
    alive = 0
    if q >= 1.0:
        return (stop - start,)
    threshold = int(q * _TWO64)
    for i in range(start, stop):
        st = Stream(derive_key(seed, i, LANE_STRUCTURE))
        position = 0
        ok = True
        for _ in range(depth):
            if st.next_u64() < threshold:
                position += 1
            else:
                position -= 1
                if position < 0:
                    ok = False
                    break
        if ok:
            alive += 1
    return (alive,)
