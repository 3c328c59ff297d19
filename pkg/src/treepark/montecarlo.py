"""Monte Carlo estimators for the parking process.

Every estimator derives one random stream pair per trial index from
``(seed, index)``, so the result is a pure function of (seed, parameters):
the trials can be split across any number of worker processes and the
returned counts are bit-identical.  Heavy loops run in the active kernel
backend (compiled or pure Python, see ``treepark.backend_name``).

Unconditioned critical trees have infinite expected size, so tree draws
are capped; capped draws are clipped (never silently retried) and the
affected trials are counted in ``truncated_trials`` to keep the resulting
bias observable.  Clipping removes arrivals, so it can only push visit
counts down and all-park probabilities up.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import _backend

_M64 = (1 << 64) - 1

DEFAULT_FLUX_MAX_NODES = 1_000_000
DEFAULT_SPINE_TREE_MAX_NODES = 10_000
DEFAULT_Y_TREE_MAX_NODES = 100_000
DEFAULT_REJECTION_LIMIT = 10_000


@dataclass
class Estimate:
    """A Bernoulli-proportion estimate with its sampling error.

    ``truncated_trials`` counts trials whose tree draws hit a node cap (or
    whose conditioned sampler gave up); always <= trials.
    """

    value: float
    stderr: float
    trials: int
    successes: int
    seed: int
    truncated_trials: int


@dataclass
class SpineSurvivalEstimate(Estimate):
    """Spine walk survival plus its depth-doubling bias diagnostic.

    The depth-truncated estimator can only overshoot (a walk that dies
    after the horizon is not observed dying), so ``value_double_depth``,
    when enabled, reruns the same walks to twice the depth; the difference
    bounds the visible part of the bias.  ``truncated_tree_events`` counts
    individual clipped tree draws (a walk can contain many).
    """

    depth: int
    value_double_depth: float | None
    truncated_tree_events: int


@dataclass
class YStatsEstimate:
    """Empirical moments of the spine-vertex load Y."""

    mean: float
    mean_stderr: float
    p_zero: float
    p_zero_stderr: float
    trials: int
    seed: int
    truncated_trials: int


@dataclass
class WalkState:
    """Running state of the spine walk: position = steps_taken - sum(Y)."""

    position: int = 0
    steps_taken: int = 0

    def advance(self, y: int) -> int:
        self.position += 1 - y
        self.steps_taken += 1
        return self.position


def _bernoulli_stderr(value: float, trials: int) -> float:
    return math.sqrt(value * (1.0 - value) / trials)


def _call_range(fn_name: str, seed: int, start: int, stop: int, params: tuple):
    fn = getattr(_backend.kernels, fn_name)
    return fn(seed, start, stop, *params)


def _combine(acc, part):
    if acc is None:
        return list(part)
    for i, x in enumerate(part):
        if isinstance(x, list):
            acc[i] = [u + v for u, v in zip(acc[i], x)]
        else:
            acc[i] += x
    return acc


def _fan_out(fn_name: str, seed: int, trials: int, workers: int, params: tuple):
    """Run a kernel range function over [0, trials) on ``workers`` processes.

    Chunking never affects the result (per-trial streams), only scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed &= _M64
    if workers <= 1:
        return _call_range(fn_name, seed, 0, trials, params)
    chunk = max(64, -(-trials // (workers * 8)))
    spans = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    acc = None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_call_range, fn_name, seed, lo, hi, params) for lo, hi in spans
        ]
        for fut in futures:
            acc = _combine(acc, fut.result())
    return tuple(acc)


def floor_cars(alpha: float, n: int) -> int:
    """floor(alpha * n) with a tiny inset so decimal rates like 0.3 hit the
    mathematically intended integer despite binary rounding."""
    return int(math.floor(alpha * n + 1e-9))


def estimate_parking_prob_finite(
    n: int,
    alpha: float,
    trials: int,
    seed: int,
    workers: int = 1,
    rejection_limit: int = DEFAULT_REJECTION_LIMIT,
) -> Estimate:
    """P(all floor(alpha*n) cars park on a uniform n-node tree).

    Per trial: a uniform tree via the conditioned sampler, multinomial car
    placement, success iff nothing exits the root.  Trials whose sampler
    exhausts its rejection budget count as failures and are reported in
    ``truncated_trials``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    m = floor_cars(alpha, n)
    successes, failures = _fan_out(
        "parking_range", seed, trials, workers, (n, m, rejection_limit)
    )
    value = successes / trials
    return Estimate(
        value=value,
        stderr=_bernoulli_stderr(value, trials),
        trials=trials,
        successes=successes,
        seed=seed & _M64,
        truncated_trials=failures,
    )


def estimate_flux_pmf(
    alpha: float,
    trials: int,
    seed: int,
    kmax: int = 30,
    workers: int = 1,
    max_nodes: int = DEFAULT_FLUX_MAX_NODES,
) -> list[Estimate]:
    """Empirical pmf of the root visits X, one Estimate per k in 0..kmax.

    Per trial: one unconditioned critical tree with Poisson(alpha) arrivals.
    Capped draws contribute their clipped-tree visit count and are counted
    in every bin's ``truncated_trials``.  Mass above kmax is the residual
    trials - sum(successes).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    counts, _above, truncated = _fan_out(
        "flux_pmf_range", seed, trials, workers, (alpha, max_nodes, kmax)
    )
    out = []
    for k in range(kmax + 1):
        value = counts[k] / trials
        out.append(
            Estimate(
                value=value,
                stderr=_bernoulli_stderr(value, trials),
                trials=trials,
                successes=counts[k],
                seed=seed & _M64,
                truncated_trials=truncated,
            )
        )
    return out


def estimate_spine_survival(
    alpha: float,
    depth: int,
    trials: int,
    seed: int,
    workers: int = 1,
    tree_max_nodes: int = DEFAULT_SPINE_TREE_MAX_NODES,
    depth_check: bool = True,
) -> SpineSurvivalEstimate:
    """P(the spine walk stays nonnegative for ``depth`` steps).

    Each step loads one spine vertex: Poisson(alpha) direct arrivals plus,
    with probability 1/2, the overflow (X - 1)^+ of a fresh critical tree
    (the spine vertex receives what spills out of its hanger, not the raw
    visit count).  Survival to finite depth upper-bounds survival forever;
    with ``depth_check`` the walks continue to 2*depth and the second
    estimate is reported alongside.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    factor = 2 if depth_check else 1
    alive_main, alive_ext, trunc_events, trunc_trials = _fan_out(
        "spine_range", seed, trials, workers, (alpha, depth, tree_max_nodes, factor)
    )
    value = alive_main / trials
    return SpineSurvivalEstimate(
        value=value,
        stderr=_bernoulli_stderr(value, trials),
        trials=trials,
        successes=alive_main,
        seed=seed & _M64,
        truncated_trials=trunc_trials,
        depth=depth,
        value_double_depth=(alive_ext / trials) if depth_check else None,
        truncated_tree_events=trunc_events,
    )


def estimate_y_stats(
    alpha: float,
    trials: int,
    seed: int,
    workers: int = 1,
    tree_max_nodes: int = DEFAULT_Y_TREE_MAX_NODES,
) -> YStatsEstimate:
    """Empirical mean of Y and P(Y = 0) for the spine-vertex load."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    sum_y, sum_sq, zeros, truncated = _fan_out(
        "y_stats_range", seed, trials, workers, (alpha, tree_max_nodes)
    )
    mean = sum_y / trials
    variance = max(0.0, sum_sq / trials - mean * mean)
    p_zero = zeros / trials
    return YStatsEstimate(
        mean=mean,
        mean_stderr=math.sqrt(variance / trials),
        p_zero=p_zero,
        p_zero_stderr=_bernoulli_stderr(p_zero, trials),
        trials=trials,
        seed=seed & _M64,
        truncated_trials=truncated,
    )


def estimate_ruin_never_negative(
    q: float, depth: int, trials: int, seed: int, workers: int = 1
) -> Estimate:
    """P(a +/-1 walk with up-probability q stays nonnegative for ``depth``
    steps); converges from above to m/q = (2q - 1)/q as depth grows."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    (alive,) = _fan_out("ruin_range", seed, trials, workers, (q, depth))
    value = alive / trials
    return Estimate(
        value=value,
        stderr=_bernoulli_stderr(value, trials),
        trials=trials,
        successes=alive,
        seed=seed & _M64,
        truncated_trials=0,
    )
