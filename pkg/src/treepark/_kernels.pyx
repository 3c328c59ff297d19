# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Mirror of ``treepark._kernels_py``: same stream derivation, same generator
(xoshiro256++ seeded via splitmix64), same draw order in every trial
protocol, so results are bit-identical to the pure-Python fallback.  See
that module's docstring for the protocol description.
"""

import math

from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t tp_mul128(uint64_t a, uint64_t b, uint64_t *lo) {
        __uint128_t m = (__uint128_t)a * (__uint128_t)b;
        *lo = (uint64_t)m;
        return (uint64_t)(m >> 64);
    }
    static inline int tp_popcount64(uint64_t x) { return __builtin_popcountll(x); }
    """
    uint64_t tp_mul128(uint64_t a, uint64_t b, uint64_t *lo) nogil
    int tp_popcount64(uint64_t x) nogil

cdef double TWO64 = 18446744073709551616.0
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef uint64_t INDEX_SALT = 0xA24BAED4963EE407ULL
cdef uint64_t LANE_SALT = 0x9FB21C651E98DF25ULL

cdef int LANE_STRUCTURE = 1
cdef int LANE_ARRIVAL = 2


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t c_derive_key(uint64_t seed, uint64_t index, uint64_t lane) nogil:
    cdef uint64_t h = seed
    h = mix64(h ^ (index * INDEX_SALT))
    h = mix64(h ^ (lane * LANE_SALT))
    return h


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef struct Xs:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3
    uint64_t bits
    int nbits


cdef inline void xs_seed(Xs *st, uint64_t key) nogil:
    cdef uint64_t state = key
    cdef uint64_t w[4]
    cdef int i
    for i in range(4):
        state = state + 0x9E3779B97F4A7C15ULL
        w[i] = mix64(state)
    if w[0] == 0 and w[1] == 0 and w[2] == 0 and w[3] == 0:
        w[0] = 1
    st.s0 = w[0]
    st.s1 = w[1]
    st.s2 = w[2]
    st.s3 = w[3]
    st.bits = 0
    st.nbits = 0


cdef inline uint64_t xs_next(Xs *st) nogil:
    cdef uint64_t result = rotl(st.s0 + st.s3, 23) + st.s0
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = rotl(st.s3, 45)
    return result


cdef inline int xs_bit(Xs *st) nogil:
    cdef int b
    if st.nbits < 1:
        st.bits = xs_next(st)
        st.nbits = 64
    b = <int>(st.bits & 1)
    st.bits >>= 1
    st.nbits -= 1
    return b


cdef inline int xs_two_bits(Xs *st) nogil:
    cdef int f
    if st.nbits < 2:
        st.bits = xs_next(st)
        st.nbits = 64
    f = <int>(st.bits & 3)
    st.bits >>= 2
    st.nbits -= 2
    return f


cdef inline double xs_uniform(Xs *st) nogil:
    return <double>(xs_next(st) >> 11) * INV_2_53


cdef inline uint64_t xs_randbelow(Xs *st, uint64_t n) nogil:
    cdef uint64_t x = xs_next(st)
    cdef uint64_t lo
    cdef uint64_t hi = tp_mul128(x, n, &lo)
    cdef uint64_t threshold
    if lo < n:
        threshold = (-n) % n
        while lo < threshold:
            x = xs_next(st)
            hi = tp_mul128(x, n, &lo)
    return hi


cdef inline int64_t xs_poisson(Xs *st, double exp_neg_lambda) nogil:
    cdef int64_t k = 0
    cdef double p = 1.0
    while True:
        p *= xs_uniform(st)
        if p <= exp_neg_lambda:
            return k
        k += 1


cdef int POPC2[4]
POPC2[0] = 0
POPC2[1] = 1
POPC2[2] = 1
POPC2[3] = 2


def derive_key(seed, index, lane):
    """Same key schedule as treepark.rng.derive_key (for equivalence tests)."""
    return c_derive_key(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF),
                        <uint64_t>(index & 0xFFFFFFFFFFFFFFFF),
                        <uint64_t>(lane & 0xFFFFFFFFFFFFFFFF))


def stream_u64_sequence(key, count):
    """First ``count`` raw outputs of the stream keyed by ``key``."""
    cdef Xs st
    xs_seed(&st, <uint64_t>(key & 0xFFFFFFFFFFFFFFFF))
    cdef int i
    out = []
    for i in range(count):
        out.append(xs_next(&st))
    return out


# ---------------------------------------------------------------------------
# Working buffers for one batch call.
# ---------------------------------------------------------------------------

cdef struct Bufs:
    uint8_t *counts
    int32_t *arrivals
    int64_t *stack
    uint64_t *words
    int64_t cap


cdef int bufs_alloc(Bufs *b, int64_t cap, int64_t nwords) except -1:
    b.cap = cap
    b.counts = <uint8_t *>malloc(cap * sizeof(uint8_t))
    b.arrivals = <int32_t *>malloc(cap * sizeof(int32_t))
    # Sized cap + 4: the value stack needs at most cap/2 + 2 entries but the
    # conditioned sampler reuses it as full-length rotation scratch.
    b.stack = <int64_t *>malloc((cap + 4) * sizeof(int64_t))
    b.words = <uint64_t *>malloc((nwords if nwords > 0 else 1) * sizeof(uint64_t))
    if b.counts == NULL or b.arrivals == NULL or b.stack == NULL or b.words == NULL:
        bufs_free(b)
        raise MemoryError("kernel buffer allocation failed")
    return 0


cdef void bufs_free(Bufs *b) nogil:
    if b.counts != NULL:
        free(b.counts)
    if b.arrivals != NULL:
        free(b.arrivals)
    if b.stack != NULL:
        free(b.stack)
    if b.words != NULL:
        free(b.words)
    b.counts = NULL
    b.arrivals = NULL
    b.stack = NULL
    b.words = NULL


cdef inline int64_t flux_reverse(uint8_t *counts, int32_t *arrivals, int64_t n,
                                 int64_t *stack, int64_t *parked_out) nogil:
    cdef int64_t top = 0  # stack size
    cdef int64_t parked = 0
    cdef int64_t i, k, x, child
    for i in range(n - 1, -1, -1):
        x = arrivals[i]
        k = counts[i]
        if k > top:
            k = top
        while k > 0:
            top -= 1
            child = stack[top]
            if child > 1:
                x += child - 1
            k -= 1
        if x >= 1:
            parked += 1
        stack[top] = x
        top += 1
    parked_out[0] = parked
    return stack[0]


cdef inline int64_t flux_trial(Xs *ss, Xs *as_, double exp_neg, int64_t cap,
                               Bufs *b, int64_t *n_out, int64_t *parked_out,
                               int64_t *total_out, int *trunc_out) nogil:
    cdef int64_t n = 0
    cdef int64_t pending = 1
    cdef int64_t total = 0
    cdef int c
    cdef int64_t a
    while pending > 0 and n < cap:
        c = POPC2[xs_two_bits(ss)]
        a = xs_poisson(as_, exp_neg)
        b.counts[n] = <uint8_t>c
        b.arrivals[n] = <int32_t>a
        total += a
        pending += c - 1
        n += 1
    trunc_out[0] = 1 if pending > 0 else 0
    n_out[0] = n
    total_out[0] = total
    return flux_reverse(b.counts, b.arrivals, n, b.stack, parked_out)


def flux_trial_detail(seed, index, double alpha, max_nodes):
    """Single flux trial with full detail, for cross-backend testing."""
    cdef Xs ss, as_
    xs_seed(&ss, c_derive_key(<uint64_t>seed, <uint64_t>index, LANE_STRUCTURE))
    xs_seed(&as_, c_derive_key(<uint64_t>seed, <uint64_t>index, LANE_ARRIVAL))
    cdef double exp_neg = math.exp(-alpha)
    cdef int64_t cap = <int64_t>max_nodes
    cdef Bufs b
    bufs_alloc(&b, cap, 0)
    cdef int64_t n = 0, parked = 0, total = 0
    cdef int trunc = 0
    cdef int64_t visits
    try:
        visits = flux_trial(&ss, &as_, exp_neg, cap, &b, &n, &parked, &total, &trunc)
    finally:
        bufs_free(&b)
    return visits, n, parked, total, bool(trunc)


def flux_pmf_range(seed, start, stop, double alpha, max_nodes, kmax):
    """Histogram of root visits over trials [start, stop)."""
    cdef double exp_neg = math.exp(-alpha)
    cdef int64_t cap = <int64_t>max_nodes
    cdef int64_t km = <int64_t>kmax
    cdef uint64_t useed = <uint64_t>seed
    cdef int64_t lo = <int64_t>start, hi = <int64_t>stop
    cdef Bufs b
    bufs_alloc(&b, cap, 0)
    cdef int64_t *bins = <int64_t *>malloc((km + 1) * sizeof(int64_t))
    if bins == NULL:
        bufs_free(&b)
        raise MemoryError()
    memset(bins, 0, (km + 1) * sizeof(int64_t))
    cdef int64_t above = 0, truncated = 0
    cdef int64_t i, n, parked, total, visits
    cdef int trunc
    cdef Xs ss, as_
    try:
        for i in range(lo, hi):
            xs_seed(&ss, c_derive_key(useed, <uint64_t>i, LANE_STRUCTURE))
            xs_seed(&as_, c_derive_key(useed, <uint64_t>i, LANE_ARRIVAL))
            visits = flux_trial(&ss, &as_, exp_neg, cap, &b, &n, &parked, &total, &trunc)
            if trunc:
                truncated += 1
            if visits <= km:
                bins[visits] += 1
            else:
                above += 1
        counts = [bins[i] for i in range(km + 1)]
    finally:
        free(bins)
        bufs_free(&b)
    return counts, above, truncated


cdef int uniform_fields_counts(Xs *ss, int64_t n, int64_t rejection_limit,
                               Bufs *b, int64_t *attempts_out) nogil:
    """Fill b.counts with rotated child counts of a uniform n-node tree.

    Returns 1 on success, 0 when the rejection limit was exhausted.
    """
    cdef int64_t nwords = (n + 31) >> 5
    cdef int64_t rem = n - ((nwords - 1) << 5)
    cdef uint64_t last_mask
    if rem == 32:
        last_mask = <uint64_t>0xFFFFFFFFFFFFFFFFULL
    else:
        last_mask = (<uint64_t>1 << (2 * rem)) - 1
    cdef int64_t target = n - 1
    cdef int64_t attempt, j, total
    cdef int64_t s, best, pos, start_at
    cdef int c
    for attempt in range(1, rejection_limit + 1):
        total = 0
        for j in range(nwords):
            b.words[j] = xs_next(ss)
        b.words[nwords - 1] &= last_mask
        for j in range(nwords):
            total += tp_popcount64(b.words[j])
        if total != target:
            continue
        attempts_out[0] = attempt
        # extract child counts in draw order into the tail of b.counts? No:
        # write draw-order counts, then rotate in place via second buffer-free
        # pass using the stack buffer as scratch (n <= cap).
        s = 0
        best = 1
        pos = 0
        for j in range(n):
            c = POPC2[(b.words[j >> 5] >> ((j & 31) << 1)) & 3]
            b.stack[j] = c  # scratch: draw-order counts
            s += c - 1
            if s < best:
                best = s
                pos = j
        start_at = (pos + 1) % n
        for j in range(n):
            b.counts[j] = <uint8_t>b.stack[(start_at + j) % n]
        return 1
    attempts_out[0] = rejection_limit
    return 0


def parking_trial_detail(seed, index, n, m, rejection_limit):
    """Single fixed-size parking trial: (root_visits, parked, attempts) or None."""
    cdef Xs ss, as_
    xs_seed(&ss, c_derive_key(<uint64_t>seed, <uint64_t>index, LANE_STRUCTURE))
    xs_seed(&as_, c_derive_key(<uint64_t>seed, <uint64_t>index, LANE_ARRIVAL))
    cdef int64_t nn = <int64_t>n, mm = <int64_t>m
    cdef int64_t nwords = (nn + 31) >> 5
    cdef Bufs b
    bufs_alloc(&b, nn, nwords)
    cdef int64_t attempts = 0, parked = 0, j
    cdef int64_t visits
    cdef int ok
    try:
        ok = uniform_fields_counts(&ss, nn, <int64_t>rejection_limit, &b, &attempts)
        if not ok:
            return None
        memset(b.arrivals, 0, nn * sizeof(int32_t))
        for j in range(mm):
            b.arrivals[xs_randbelow(&as_, <uint64_t>nn)] += 1
        visits = flux_reverse(b.counts, b.arrivals, nn, b.stack, &parked)
    finally:
        bufs_free(&b)
    return visits, parked, attempts


def parking_range(seed, start, stop, n, m, rejection_limit):
    """All-cars-park successes on uniform n-node trees over [start, stop)."""
    cdef uint64_t useed = <uint64_t>seed
    cdef int64_t lo = <int64_t>start, hi = <int64_t>stop
    cdef int64_t nn = <int64_t>n, mm = <int64_t>m
    cdef int64_t rlim = <int64_t>rejection_limit
    cdef int64_t nwords = (nn + 31) >> 5
    cdef Bufs b
    bufs_alloc(&b, nn, nwords)
    cdef int64_t successes = 0, failures = 0
    cdef int64_t i, j, attempts, parked, visits
    cdef int ok
    cdef Xs ss, as_
    try:
        for i in range(lo, hi):
            xs_seed(&ss, c_derive_key(useed, <uint64_t>i, LANE_STRUCTURE))
            xs_seed(&as_, c_derive_key(useed, <uint64_t>i, LANE_ARRIVAL))
            ok = uniform_fields_counts(&ss, nn, rlim, &b, &attempts)
            if not ok:
                failures += 1
                continue
            memset(b.arrivals, 0, nn * sizeof(int32_t))
            for j in range(mm):
                b.arrivals[xs_randbelow(&as_, <uint64_t>nn)] += 1
            visits = flux_reverse(b.counts, b.arrivals, nn, b.stack, &parked)
            if visits <= 1:
                successes += 1
    finally:
        bufs_free(&b)
    return successes, failures


cdef inline int64_t y_draw(Xs *ss, Xs *as_, double exp_neg, int64_t tree_cap,
                           Bufs *b, int *trunc_out) nogil:
    cdef int64_t y, visits, n, parked, total
    cdef int has_tree = xs_bit(ss)
    y = xs_poisson(as_, exp_neg)
    trunc_out[0] = 0
    if has_tree:
        visits = flux_trial(ss, as_, exp_neg, tree_cap, b, &n, &parked, &total, trunc_out)
        if visits > 1:
            y += visits - 1
    return y


def y_stats_range(seed, start, stop, double alpha, tree_max_nodes):
    """Moments of the spine-vertex load Y over trials [start, stop)."""
    cdef double exp_neg = math.exp(-alpha)
    cdef uint64_t useed = <uint64_t>seed
    cdef int64_t lo = <int64_t>start, hi = <int64_t>stop
    cdef int64_t cap = <int64_t>tree_max_nodes
    cdef Bufs b
    bufs_alloc(&b, cap, 0)
    cdef int64_t sum_y = 0, sum_sq = 0, zeros = 0, truncated = 0
    cdef int64_t i, y
    cdef int trunc
    cdef Xs ss, as_
    try:
        for i in range(lo, hi):
            xs_seed(&ss, c_derive_key(useed, <uint64_t>i, LANE_STRUCTURE))
            xs_seed(&as_, c_derive_key(useed, <uint64_t>i, LANE_ARRIVAL))
            y = y_draw(&ss, &as_, exp_neg, cap, &b, &trunc)
            sum_y += y
            sum_sq += y * y
            if y == 0:
                zeros += 1
            if trunc:
                truncated += 1
    finally:
        bufs_free(&b)
    return sum_y, sum_sq, zeros, truncated


def spine_range(seed, start, stop, double alpha, depth, tree_max_nodes, check_factor):
    """Spine-parking survival walks over trials [start, stop)."""
    cdef double exp_neg = math.exp(-alpha)
    cdef uint64_t useed = <uint64_t>seed
    cdef int64_t lo = <int64_t>start, hi = <int64_t>stop
    cdef int64_t d = <int64_t>depth
    cdef int64_t horizon = d * <int64_t>check_factor
    cdef int64_t cap = <int64_t>tree_max_nodes
    cdef Bufs b
    bufs_alloc(&b, cap, 0)
    cdef int64_t alive_main = 0, alive_ext = 0
    cdef int64_t trunc_events = 0, trunc_trials = 0, trial_truncs = 0
    cdef int64_t i, h, y, position, died_at
    cdef int trunc
    cdef Xs ss, as_
    try:
        for i in range(lo, hi):
            xs_seed(&ss, c_derive_key(useed, <uint64_t>i, LANE_STRUCTURE))
            xs_seed(&as_, c_derive_key(useed, <uint64_t>i, LANE_ARRIVAL))
            position = 0
            died_at = 0
            trial_truncs = 0
            for h in range(1, horizon + 1):
                y = y_draw(&ss, &as_, exp_neg, cap, &b, &trunc)
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
            elif died_at > d:
                alive_main += 1
    finally:
        bufs_free(&b)
    return alive_main, alive_ext, trunc_events, trunc_trials


def ruin_range(seed, start, stop, double q, depth):
    """Never-negative +/-1 walks with up-step probability q."""
    cdef uint64_t useed = <uint64_t>seed
    cdef int64_t lo = <int64_t>start, hi = <int64_t>stop
    cdef int64_t d = <int64_t>depth
    cdef int64_t alive = 0
    cdef int64_t i, step, position
    cdef int ok
    cdef uint64_t threshold
    cdef Xs st
    if q >= 1.0:
        return (stop - start,)
    threshold = <uint64_t>(q * TWO64)
    for i in range(lo, hi):
        xs_seed(&st, c_derive_key(useed, <uint64_t>i, LANE_STRUCTURE))
        position = 0
        ok = 1
        for step in range(d):
            if xs_next(&st) < threshold:
                position += 1
            else:
                position -= 1
                if position < 0:
                    ok = 0
                    break
        if ok:
            alive += 1
    return (alive,)
