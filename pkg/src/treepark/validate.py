"""Invariant suites: desk-scale checks runnable from the CLI.

Each suite returns a list of (check name, passed, detail) triples; the CLI
prints them with timings and fails the run when any check fails.  The
heavier statistical versions of these checks (larger trial counts, tighter
tolerances) live in the test suite; these are sized to finish in seconds
to a couple of minutes.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from scipy.stats import chi2

from . import analytics, montecarlo, parking, tree
from .rng import LANE_ARRIVAL, LANE_STRUCTURE, Stream, derive_key

CheckResult = tuple[str, bool, str]

CATALAN = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786, 208012]


# ---------------------------------------------------------------------------
# Reusable checkers (the acceptance tests call these at full scale).
# ---------------------------------------------------------------------------


def vectors_with_sum_at_most(n: int, max_total: int):
    """All nonnegative integer vectors of length n with sum <= max_total."""
    for total in range(max_total + 1):
        for cuts in itertools.combinations(range(total + n - 1), n - 1):
            vec = []
            prev = -1
            for c in cuts:
                vec.append(c - prev - 1)
                prev = c
            vec.append(total + n - 2 - prev)
            yield vec


def check_order_invariance(max_nodes: int, max_total: int) -> tuple[int, int]:
    """Exhaustive abelian-property check.

    For every tree with up to ``max_nodes`` nodes and every arrival vector
    with at most ``max_total`` cars, every ordering of the car list must
    reproduce the visit recursion's result exactly (root visits, parked,
    exited, occupancy).  Returns (cases, orderings) checked; raises
    AssertionError on the first violation.
    """
    cases = 0
    orderings = 0
    for n in range(1, max_nodes + 1):
        for t, _w in tree.enumerate_trees(n):
            for vec in vectors_with_sum_at_most(n, max_total):
                arr = parking.Arrivals(list(vec))
                ref = parking.compute_flux(t, arr)
                base_cars = []
                for node, count in enumerate(vec):
                    base_cars.extend([node] * count)
                cases += 1
                for perm in set(itertools.permutations(base_cars)):
                    cars = list(enumerate(perm))
                    got, _records = parking.simulate_sequential(t, cars)
                    orderings += 1
                    assert got.root_visits == ref.root_visits, (n, vec, perm)
                    assert got.parked == ref.parked, (n, vec, perm)
                    assert got.exited == ref.exited, (n, vec, perm)
                    assert got.occupancy == ref.occupancy, (n, vec, perm)
    return cases, orderings


def check_flux_monotonicity(max_nodes: int, max_total: int) -> int:
    """Adding one car anywhere never decreases the root visit count."""
    checked = 0
    for n in range(1, max_nodes + 1):
        for t, _w in tree.enumerate_trees(n):
            for vec in vectors_with_sum_at_most(n, max_total):
                base = parking.compute_flux(t, parking.Arrivals(list(vec)))
                for v in range(n):
                    bumped = list(vec)
                    bumped[v] += 1
                    more = parking.compute_flux(t, parking.Arrivals(bumped))
                    assert more.root_visits >= base.root_visits, (n, vec, v)
                    checked += 1
    return checked


def check_cycle_lemma_uniqueness(n: int, draws: int, seed: int) -> None:
    """Each drawn conditioned field sequence admits exactly one valid rotation."""
    st = Stream(derive_key(seed, n, LANE_STRUCTURE))
    from . import _kernels_py

    popc = (0, 1, 1, 2)
    for _ in range(draws):
        fields, _ = _kernels_py.uniform_offspring_fields(st, n, 10_000)
        assert fields is not None
        valid = 0
        for shift in range(n):
            rotated = fields[shift:] + fields[:shift]
            s = 0
            ok = True
            for j in range(n - 1):
                s += popc[rotated[j]] - 1
                if s < 0:
                    ok = False
                    break
            if ok:
                valid += 1
        assert valid == 1, f"{valid} valid rotations for {fields}"


def uniformity_chi_square(
    n: int, samples: int, seed: int, significance: float = 0.01
) -> tuple[float, float]:
    """Chi-square statistic and critical value for sampler uniformity over
    all n-node shapes."""
    shapes = {t.shape_key(): 0 for t, _w in tree.enumerate_trees(n)}
    cfg = tree.SamplerConfig(seed=seed)
    for i in range(samples):
        st = Stream(derive_key(seed, i, LANE_STRUCTURE))
        t = tree.sample_uniform_tree(n, cfg, st)
        key = t.shape_key()
        assert key in shapes, f"sampled shape {key} not among enumerated"
        shapes[key] += 1
    expected = samples / len(shapes)
    stat = sum((c - expected) ** 2 / expected for c in shapes.values())
    critical = float(chi2.ppf(1.0 - significance, df=len(shapes) - 1))
    return stat, critical


def konheim_weiss_table(max_n: int) -> list[tuple[int, int, int, int]]:
    """(n, m, brute, formula) for all 1 <= m <= n <= max_n."""
    out = []
    for n in range(1, max_n + 1):
        for m in range(1, n + 1):
            brute, formula = parking.count_line_parking_functions(n, m)
            out.append((n, m, brute, formula))
    return out


def pgf_grid_checks(alpha: float, points: int = 101) -> dict[str, float]:
    """Grid diagnostics of the generating function at one arrival rate.

    Returns the worst-case violations: quadratic-identity residual,
    monotonicity defect, convexity defect, |G(0) - p|, |G(1) - 1|, and the
    most negative g value.
    """
    if alpha <= analytics.ALPHA_CRIT:
        p = 1.0 - alpha
    else:
        p = analytics.solve_p(alpha)
    grid = [j / (points - 1) for j in range(points)]
    values = []
    quad_resid = 0.0
    min_g = math.inf
    for s in grid:
        be = analytics.branch_eval(s, p, alpha)
        g_val = analytics.pgf_X(s, alpha, p)
        values.append(g_val)
        resid = abs(
            be.a * g_val * g_val
            + 2.0 * (be.a * be.b - 2.0 * s * s) * g_val
            + be.a * be.b * be.b
        )
        quad_resid = max(quad_resid, resid)
        min_g = min(min_g, be.g)
    mono_defect = 0.0
    for i in range(1, points):
        mono_defect = max(mono_defect, values[i - 1] - values[i])
    convex_defect = 0.0
    for i in range(1, points - 1):
        convex_defect = max(
            convex_defect, -(values[i + 1] - 2.0 * values[i] + values[i - 1])
        )
    return {
        "quad_resid": quad_resid,
        "mono_defect": mono_defect,
        "convex_defect": convex_defect,
        "g0_err": abs(values[0] - p),
        "g1_err": abs(values[-1] - 1.0),
        "min_g": min_g,
    }


def g_turning_points(alpha: float, p: float, points: int = 20001) -> list[float]:
    """Stationary points of g on (0, 1) located by sign changes of g'."""
    out = []
    prev_s = 1.0 / points
    prev = analytics.g_prime(prev_s, p, alpha)
    for j in range(2, points):
        s = j / points
        cur = analytics.g_prime(s, p, alpha)
        if prev < 0.0 <= cur or cur < 0.0 <= prev:
            lo, hi = prev_s, s
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if (analytics.g_prime(mid, p, alpha) < 0.0) == (
                    analytics.g_prime(lo, p, alpha) < 0.0
                ):
                    lo = mid
                else:
                    hi = mid
            out.append(0.5 * (lo + hi))
        prev_s, prev = s, cur
    return out


def pgf_oracle_sup_error(alpha: float, support_cap: int | None = None) -> float:
    """sup over a 101-point grid of |branch pgf - oracle pgf|."""
    pmf = analytics.oracle_dist_X(alpha, support_cap)
    worst = 0.0
    for j in range(101):
        s = j / 100
        worst = max(worst, abs(analytics.pgf_X(s, alpha) - pmf.pgf(s)))
    return worst


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def _result(name: str, passed: bool, detail: str) -> CheckResult:
    return (name, bool(passed), detail)


def tree_suite(seed: int) -> list[CheckResult]:
    out = []

    counts = [len(tree.enumerate_trees(n)) for n in range(1, 7)]
    expected = CATALAN[1:7]
    out.append(
        _result(
            "enumeration counts n<=6",
            counts == expected,
            f"{counts} vs {expected}",
        )
    )

    ok = True
    for n in range(1, 6):
        seen = set()
        total = Fraction(0)
        for t, w in tree.enumerate_trees(n):
            t.validate()
            key = t.shape_key()
            ok &= key not in seen
            seen.add(key)
            total += w
        ok &= total == Fraction(CATALAN[n], 4**n)
    out.append(_result("enumeration distinct + weights", ok, "4^-n each"))

    # Offspring histogram over sampled trees (desk scale: the test suite
    # runs the 1e5-node version).
    cfg = tree.SamplerConfig(seed=seed, max_nodes=10_000)
    hist = [0, 0, 0]
    nodes = 0
    i = 0
    while nodes < 30_000:
        st = Stream(derive_key(seed, i, LANE_STRUCTURE))
        t = tree.sample_bgw_tree(cfg, st)
        i += 1
        if isinstance(t, tree.Truncated):
            continue
        for v in range(t.n):
            hist[t.child_count(v)] += 1
        nodes += t.n
    ok = True
    details = []
    for k, prob in ((0, 0.25), (1, 0.5), (2, 0.25)):
        est = hist[k] / nodes
        se = math.sqrt(prob * (1 - prob) / nodes)
        ok &= abs(est - prob) < 3 * se
        details.append(f"P(c={k})={est:.4f}")
    out.append(_result("offspring histogram 3se", ok, " ".join(details)))

    # Size distribution against enumeration weights.
    size_counts = [0] * 7
    ntrees = 50_000
    for i in range(ntrees):
        st = Stream(derive_key(seed ^ 0x51DE, i, LANE_STRUCTURE))
        t = tree.sample_bgw_tree(cfg, st)
        if isinstance(t, tree.Truncated):
            continue
        if t.n <= 6:
            size_counts[t.n] += 1
    ok = True
    for k in range(1, 7):
        exact = float(Fraction(CATALAN[k], 4**k))
        est = size_counts[k] / ntrees
        se = math.sqrt(exact * (1 - exact) / ntrees)
        ok &= abs(est - exact) < 3 * se
    out.append(_result("size pmf k<=6 3se", ok, f"counts {size_counts[1:]}"))

    ok = True
    details = []
    for n in (2, 3, 4):
        stat, crit = uniformity_chi_square(n, 20_000, seed ^ n)
        ok &= stat < crit
        details.append(f"n={n}: {stat:.1f}<{crit:.1f}")
    out.append(_result("uniformity chi2 (desk)", ok, " ".join(details)))

    try:
        for n in (2, 3, 4, 5, 6):
            check_cycle_lemma_uniqueness(n, 300, seed)
        out.append(_result("cycle lemma uniqueness", True, "300 draws/size"))
    except AssertionError as e:
        out.append(_result("cycle lemma uniqueness", False, str(e)))

    # Spine segment hanger statistics.
    hangers = 0
    vertices = 0
    i = 0
    while vertices < 30_000:
        st = Stream(derive_key(seed ^ 0x59113E, i, LANE_STRUCTURE))
        seg = tree.build_spine_segment(100, cfg, st)
        i += 1
        if isinstance(seg, tree.Truncated):
            continue
        vertices += 101
        hangers += sum(1 for a in seg.attached if a is not None)
        for a in seg.attached:
            if a is not None:
                a.validate()
    est = hangers / vertices
    se = math.sqrt(0.25 / vertices)
    out.append(
        _result(
            "spine hanger rate = 1/2 (mean = branching variance)",
            abs(est - 0.5) < 3 * se,
            f"{est:.4f} over {vertices} vertices",
        )
    )
    return out


def parking_suite(seed: int) -> list[CheckResult]:
    out = []

    t1 = tree.tree_from_fields([0])
    fr = parking.compute_flux(t1, parking.Arrivals([3]))
    out.append(
        _result(
            "single node A=3",
            (fr.root_visits, fr.flux, fr.parked) == (3, 2, 1),
            str(fr),
        )
    )

    # Expected values derived from the sequential simulator: 3 cars, one
    # exits through the root, so two park.
    t3 = tree.tree_from_fields([3, 0, 0])  # root with two leaf children
    arr3 = parking.Arrivals([1, 2, 0])
    fr = parking.compute_flux(t3, arr3)
    seq, _ = parking.simulate_sequential(t3, [(0, 0), (1, 1), (2, 1)])
    out.append(
        _result(
            "root+2 leaves A=(1,2,0)",
            (fr.root_visits, fr.flux, fr.parked) == (2, 1, 2)
            and (seq.root_visits, seq.flux, seq.parked) == (2, 1, 2),
            str(fr),
        )
    )

    try:
        cases, orders = check_order_invariance(4, 3)
        out.append(_result("order invariance (desk)", True, f"{cases} cases, {orders} orders"))
    except AssertionError as e:
        out.append(_result("order invariance (desk)", False, str(e)))

    try:
        checked = check_flux_monotonicity(4, 3)
        out.append(_result("visit monotonicity", True, f"{checked} bumps"))
    except AssertionError as e:
        out.append(_result("visit monotonicity", False, str(e)))

    # Conservation on random instances.
    cfg = tree.SamplerConfig(seed=seed, max_nodes=100_000)
    ok = True
    for i in range(500):
        st = Stream(derive_key(seed ^ 0xC0115, i, LANE_STRUCTURE))
        t = tree.sample_bgw_tree(cfg, st)
        if isinstance(t, tree.Truncated):
            continue
        arr = parking.poisson_arrivals(t, 0.7, Stream(derive_key(seed, i, LANE_ARRIVAL)))
        fr = parking.compute_flux(t, arr)
        ok &= fr.parked + fr.exited == arr.total
        ok &= fr.exited == fr.flux
        ok &= fr.parked == sum(fr.occupancy)
        ok &= fr.all_parked == (fr.root_visits <= 1)
    out.append(_result("conservation (random)", ok, "500 instances"))

    # Path tree agrees with the line parking definition.
    ok = True
    for n in range(1, 5):
        pt = parking.path_tree(n)
        for m in range(1, n + 1):
            for prefs in itertools.product(range(1, n + 1), repeat=m):
                counts = [0] * n
                for p in prefs:
                    counts[p - 1] += 1
                fr = parking.compute_flux(pt, parking.Arrivals(counts))
                ok &= fr.all_parked == parking.is_line_parking_function(list(prefs), n)
    out.append(_result("path tree = line parking", ok, "n<=4 exhaustive"))

    table = konheim_weiss_table(5)
    ok = all(brute == formula for _n, _m, brute, formula in table)
    out.append(_result("line parking counts n<=5", ok, f"{len(table)} pairs"))
    return out


def analytics_suite(seed: int, alpha: float = 0.3) -> list[CheckResult]:
    out = []
    grid_alphas = (0.1, 0.3, 0.5, 0.8, 1.2, 1.5)

    ok = True
    details = []
    for a in grid_alphas:
        d = pgf_grid_checks(a)
        ok &= d["quad_resid"] < 1e-9
        ok &= d["mono_defect"] <= 1e-12
        ok &= d["convex_defect"] <= 1e-10
        ok &= d["g0_err"] < 1e-12 and d["g1_err"] < 1e-12
        ok &= d["min_g"] > -1e-9
        details.append(f"a={a}: quad={d['quad_resid']:.1e}")
    out.append(_result("pgf axioms + quadratic identity", ok, " ".join(details)))

    ok = True
    for a in (0.1, 0.3, 0.5):
        worst = min(
            analytics.g_eval(s / 1000.0, 1.0 - a, a) for s in range(0, 1000)
        )  # s in [0, 0.999]
        ok &= worst > 0.0
    out.append(_result("subcritical g > 0 on [0, 1)", ok, ""))

    ok = True
    details = []
    for a in (0.8, 1.0, 1.5):
        p = analytics.solve_p(a)
        tps = g_turning_points(a, p)
        sp = analytics.s_switch(a, p)
        ok &= len(tps) == 2
        if len(tps) == 2:
            ok &= abs(analytics.g_eval(tps[0], p, a)) < 1e-6
            ok &= analytics.g_eval(tps[1], p, a) > 0.0
            ok &= abs(tps[0] - sp) < 1e-4
        details.append(f"a={a}: t1={tps[0]:.4f}" if tps else f"a={a}: none")
    out.append(_result("supercritical turning points", ok, " ".join(details)))

    ok = True
    h = 1e-5
    for a in (0.1, 0.3, 0.5):
        deriv = (analytics.pgf_X(1.0, a) - analytics.pgf_X(1.0 - h, a)) / h
        ok &= abs(deriv - analytics.mean_X(a)) < 1e-2
    out.append(_result("pgf slope at 1 = mean", ok, ""))

    ok = True
    a = 0.05
    while a <= 3.0 + 1e-9:
        ss = analytics.spine_stats(a)
        ok &= 0.0 <= ss.rho <= 1.0
        ok &= 0.0 < ss.p_y_zero <= 1.0
        a += 0.05
    out.append(_result("rho, P(Y=0) ranges over sweep", ok, "alpha in [0.05, 3]"))

    pmf = analytics.oracle_dist_X(0.3)
    err = abs(float(pmf.mass[0]) - 0.7)
    out.append(_result("oracle P(X=0) at 0.3", err < 1e-8, f"err={err:.2e}"))

    p_solver = analytics.solve_p(1.0)
    pmf1 = analytics.oracle_dist_X(1.0, 400)
    err = abs(float(pmf1.mass[0]) - p_solver)
    lo = 0.25 * math.exp(-1.0)
    hi = analytics.c_upper(1.0)
    in_brackets = lo < p_solver < hi and lo < float(pmf1.mass[0]) < hi
    out.append(
        _result(
            "solver vs oracle at 1.0",
            err < 1e-4 and in_brackets,
            f"err={err:.2e}, overflow={pmf1.overflow:.4f}",
        )
    )

    sup = pgf_oracle_sup_error(alpha)
    out.append(
        _result(
            f"pgf vs oracle sup error at alpha={alpha}",
            sup < 1e-6,
            f"sup={sup:.2e}",
        )
    )

    exact = analytics.ruin_prob(0.4, 0.7)
    gambler = 1.0 - 0.3 / 0.7
    out.append(
        _result(
            "ruin closed form vs gambler's ruin",
            abs(exact - 4.0 / 7.0) < 1e-15 and abs(exact - gambler) < 1e-15,
            f"{exact}",
        )
    )
    return out


def montecarlo_suite(seed: int) -> list[CheckResult]:
    out = []

    e1 = montecarlo.estimate_flux_pmf(0.3, 2000, seed, kmax=5, workers=1)
    e2 = montecarlo.estimate_flux_pmf(0.3, 2000, seed, kmax=5, workers=2)
    out.append(
        _result(
            "worker-count invariance",
            e1 == e2,
            f"P(X=0)={e1[0].value}",
        )
    )

    est = montecarlo.estimate_flux_pmf(0.3, 100_000, seed ^ 0xF1, kmax=0)[0]
    err = abs(est.value - 0.7)
    out.append(
        _result(
            "P(X=0) at 0.3 (1e5 trials)",
            err < 4 * est.stderr + 2e-3,
            f"{est.value:.4f} +- {est.stderr:.4f}, trunc={est.truncated_trials}",
        )
    )

    ys = montecarlo.estimate_y_stats(0.3, 100_000, seed ^ 0xF2)
    stats = analytics.spine_stats(0.3)
    ok = abs(ys.mean - stats.mean_y) < 4 * ys.mean_stderr + 2e-3
    ok &= abs(ys.p_zero - stats.p_y_zero) < 4 * ys.p_zero_stderr + 2e-3
    out.append(
        _result(
            "Y moments at 0.3 (1e5 trials)",
            ok,
            f"mean={ys.mean:.4f} P(Y=0)={ys.p_zero:.4f}",
        )
    )

    est = montecarlo.estimate_ruin_never_negative(0.7, 2000, 10_000, seed ^ 0xF3)
    err = abs(est.value - 4.0 / 7.0)
    out.append(
        _result(
            "ruin walk q=0.7 (1e4 walks)",
            err < 4 * est.stderr + 0.01,
            f"{est.value:.4f} vs {4 / 7:.4f}",
        )
    )

    est = montecarlo.estimate_spine_survival(
        0.3, 2000, 2000, seed ^ 0xF4, depth_check=False
    )
    err = abs(est.value - stats.prob_all_park)
    out.append(
        _result(
            "spine survival at 0.3 (desk)",
            err < 4 * est.stderr + 5e-3,
            f"{est.value:.4f} vs {stats.prob_all_park:.4f}",
        )
    )
    return out


SUITES = {
    "tree": tree_suite,
    "parking": parking_suite,
    "analytics": analytics_suite,
    "montecarlo": montecarlo_suite,
}


def run_suites(
    names: list[str] | None = None, seed: int = 0, alpha: float = 0.3
) -> tuple[bool, list[tuple[str, float, list[CheckResult]]]]:
    """Run the named suites (all by default); returns (all_passed, results)."""
    import time

    chosen = names or list(SUITES)
    results = []
    all_ok = True
    for name in chosen:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        fn = SUITES[name]
        t0 = time.perf_counter()
        if name == "analytics":
            checks = fn(seed, alpha)
        else:
            checks = fn(seed)
        elapsed = time.perf_counter() - t0
        all_ok &= all(passed for _n, passed, _d in checks)
        results.append((name, elapsed, checks))
    return all_ok, results
