"""Closed-form analytics of the root flux on critical binary branching trees.

Setting: a critical Bin(2, 1/2) branching tree, an independent Poisson(alpha)
number of cars at each vertex, cars driving toward the root.  X denotes the
number of cars that visit the root and p = P(X = 0).

The generating function G(s) = E[s^X] satisfies the quadratic

    a(s) * G^2 + 2*(a(s)*b(s) - 2*s^2) * G + a(s)*b(s)^2 = 0,
    a(s) = exp(alpha*(s-1)),   b(s) = s*(1+p) - p,

whose two solution branches are

    Q_pm(s) = (2*s^2 - a*b pm 2*s*sqrt(g)) / a,    g(s) = s^2 - a(s)*b(s).

Below the critical arrival rate 2 - sqrt(2) the function follows Q_plus on
all of [0, 1] and p = 1 - alpha; above it, G switches from Q_plus to
Q_minus at the tangency point s_p where g and g' vanish together, which
pins p numerically.  (Note b(s) = s*(1+p) - p throughout: the variant with
"+ p" violates G(1) = 1 and is not used.)

An independent oracle is provided: iterating the distributional recursion
X = Po(alpha) + sum over Bin(2,1/2) children of (X_i - 1)^+ on truncated
probability mass functions converges to the law of X without ever touching
the branch formulas, so the two routes cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
ALPHA_CRIT = 2.0 - SQRT2  # arrival rate where the flux stops being tight

# Roots of alpha^2 - 4*alpha + 2; the factored form keeps the polynomial
# exactly zero at the stored critical point.
_DISC_ROOT_LO = 2.0 - SQRT2
_DISC_ROOT_HI = 2.0 + SQRT2

# Roots of alpha^2 - 6*alpha + 1, used by the upper bound on p.
_C_ROOT_LO = 3.0 - 2.0 * SQRT2

EPS_NUM = 1e-9  # tolerated floating-point dip of g below zero

DEFAULT_SUPPORT_SUBCRITICAL = 200
DEFAULT_SUPPORT_SUPERCRITICAL = 400


class AnalyticsError(Exception):
    """Base class for analytic-layer failures."""


class InvalidAlpha(AnalyticsError):
    """Arrival rate outside the operation's domain."""


class NegativeDiscriminant(AnalyticsError):
    """A square-root argument went genuinely negative (inconsistent p, alpha)."""


class NoBracket(AnalyticsError):
    """The tangency residual never changed sign on the scan grid."""


class NoConvergence(AnalyticsError):
    """Fixed-point iteration failed to reach the tolerance."""


class InvalidStepLaw(AnalyticsError):
    """Walk step law violates the never-negative formula's hypotheses."""


def _disc_poly(alpha: float) -> float:
    """alpha^2 - 4*alpha + 2, factored so it vanishes exactly at 2 - sqrt(2)."""
    return (alpha - _DISC_ROOT_LO) * (alpha - _DISC_ROOT_HI)


def phi_criterion(alpha: float) -> float:
    """Tightness criterion for the flux: (1-mu)^2 - (1/2)(sigma^2 + mu^2 - mu).

    With mu = sigma^2 = alpha and branching variance 1/2 this simplifies to
    (alpha^2 - 4*alpha + 2) / 2: positive below 2 - sqrt(2), negative above.
    """
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    return 0.5 * _disc_poly(alpha)


@dataclass
class BranchEval:
    """All intermediate quantities of the branch formulas at one point s."""

    s: float
    a: float
    b: float
    g: float
    f: float
    q_plus: float
    q_minus: float


def branch_eval(s: float, p: float, alpha: float) -> BranchEval:
    """Evaluate a, b, g, f and both branches Q_pm at s.

    Values of g in [-EPS_NUM, 0) are clamped to 0 before the square root
    (tangency makes g touch zero, so tiny dips are expected); anything more
    negative raises NegativeDiscriminant.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    a = math.exp(alpha * (s - 1.0))
    # b = s*(1+p) - p, written as s + p*(s-1) so b(1) = 1 and g(1) = 0 are
    # exact; the original form leaves a 1-ulp residue that the square root
    # amplifies to ~1e-8 in the branches.
    b = s + p * (s - 1.0)
    g = s * s - a * b
    if g < 0.0:
        if g < -EPS_NUM:
            raise NegativeDiscriminant(
                f"g({s}) = {g} < -{EPS_NUM} for p={p}, alpha={alpha}"
            )
        g_clamped = 0.0
    else:
        g_clamped = g
    root = 2.0 * s * math.sqrt(g_clamped)
    core = 2.0 * s * s - a * b
    f = alpha * (1.0 + p) * s * s - (1.0 + (1.0 + alpha) * p) * s + 2.0 * p
    return BranchEval(
        s=s,
        a=a,
        b=b,
        g=g,
        f=f,
        q_plus=(core + root) / a,
        q_minus=(core - root) / a,
    )


def g_eval(s: float, p: float, alpha: float) -> float:
    """g(s) = s^2 - exp(alpha*(s-1)) * (s*(1+p) - p)."""
    return s * s - math.exp(alpha * (s - 1.0)) * (s + p * (s - 1.0))


def g_prime(s: float, p: float, alpha: float) -> float:
    """g'(s) = 2s - exp(alpha*(s-1)) * (alpha*(s*(1+p) - p) + 1 + p)."""
    return 2.0 * s - math.exp(alpha * (s - 1.0)) * (
        alpha * (s + p * (s - 1.0)) + 1.0 + p
    )


def c_upper(alpha: float) -> float:
    """Strict upper bound on p above criticality.

    Equal to ((3 - 2*sqrt(2))*alpha - 1) / (alpha^2 - 6*alpha + 1) away from
    the removable singularity at 3 + 2*sqrt(2); numerator and denominator
    share the root there, leaving c = (3 - 2*sqrt(2)) / (alpha - 3 + 2*sqrt(2)),
    which is the form evaluated here (continuous on the whole domain, value
    (3*sqrt(2) - 4)/8 at the singular point).
    """
    if alpha <= ALPHA_CRIT:
        raise InvalidAlpha(f"c_upper requires alpha > {ALPHA_CRIT}, got {alpha}")
    return _C_ROOT_LO / (alpha - _C_ROOT_LO)


def s_switch(alpha: float, p: float) -> float:
    """Branch-switch point: the smaller root of
    f(s) = alpha*(1+p)*s^2 - (1+(1+alpha)*p)*s + 2*p.

    Evaluated in the cancellation-free form 2*C / (B + sqrt(B^2 - 4*A*C)).
    A tiny negative discriminant (repeated root up to rounding) is clamped;
    a genuinely negative one means p exceeds its upper bound.
    """
    if alpha <= ALPHA_CRIT:
        raise InvalidAlpha(f"s_switch requires alpha > {ALPHA_CRIT}, got {alpha}")
    quad_a = alpha * (1.0 + p)
    quad_b = 1.0 + (1.0 + alpha) * p
    quad_c = 2.0 * p
    disc = quad_b * quad_b - 4.0 * quad_a * quad_c
    if disc < 0.0:
        if disc < -1e-12 * quad_b * quad_b:
            raise NegativeDiscriminant(
                f"switch-point discriminant {disc} < 0: p={p} > c({alpha})"
            )
        disc = 0.0
    return 2.0 * quad_c / (quad_b + math.sqrt(disc))


def solve_p(alpha: float, tol: float = 1e-12) -> float:
    """P(X = 0) as a function of the arrival rate.

    Below the critical rate the answer is exactly 1 - alpha.  Above it, p
    is pinned by tangency: at the switch point s_p (smaller root of f) both
    g and g' must vanish, and f already encodes g' = 0 given g = 0, so the
    scalar residual r(p) = g(s_p(p)) suffices.  r is bracketed by a
    64-point sign-change scan over (max(exp(-alpha)/4, 1-alpha), c(alpha)]
    and solved by bisection; monotonicity of r is not assumed.
    """
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if alpha <= ALPHA_CRIT:
        return 1.0 - alpha

    lo = max(0.25 * math.exp(-alpha), 1.0 - alpha)
    hi = c_upper(alpha)

    def residual(p: float) -> float:
        return g_eval(s_switch(alpha, p), p, alpha)

    npoints = 64
    grid = [lo + (hi - lo) * j / npoints for j in range(1, npoints + 1)]
    res = [residual(p) for p in grid]
    p_lo = p_hi = None
    r_lo = r_hi = 0.0
    for j in range(len(grid) - 1):
        if res[j] == 0.0:
            return grid[j]
        if res[j] < 0.0 < res[j + 1] or res[j + 1] < 0.0 < res[j]:
            p_lo, p_hi = grid[j], grid[j + 1]
            r_lo, r_hi = res[j], res[j + 1]
            break
    if p_lo is None:
        raise NoBracket(
            f"no sign change of the tangency residual for alpha={alpha}: "
            f"residuals in [{min(res):.3e}, {max(res):.3e}] "
            f"over p in ({lo:.6f}, {hi:.6f}]"
        )

    p_mid = 0.5 * (p_lo + p_hi)
    for _ in range(200):
        p_mid = 0.5 * (p_lo + p_hi)
        r_mid = residual(p_mid)
        if abs(r_mid) < tol:
            break
        if (r_mid < 0.0) == (r_lo < 0.0):
            p_lo, r_lo = p_mid, r_mid
        else:
            p_hi, r_hi = p_mid, r_mid
    else:
        raise NoConvergence(
            f"bisection did not reach |residual| < {tol} for alpha={alpha}"
        )
    gp = g_prime(s_switch(alpha, p_mid), p_mid, alpha)
    if abs(gp) >= math.sqrt(tol):
        raise NoConvergence(
            f"tangency check failed: |g'(s_p)| = {abs(gp):.3e} >= sqrt(tol)"
        )
    return p_mid


def pgf_X(s: float, alpha: float, p: float | None = None) -> float:
    """Probability generating function of the root visits X at point s.

    Subcritical: Q_plus with p = 1 - alpha on all of [0, 1].  Supercritical:
    Q_plus up to the switch point, Q_minus beyond it, with p from solve_p.
    """
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if alpha <= ALPHA_CRIT:
        if p is None:
            p = 1.0 - alpha
        return branch_eval(s, p, alpha).q_plus
    if p is None:
        p = solve_p(alpha)
    be = branch_eval(s, p, alpha)
    return be.q_plus if s <= s_switch(alpha, p) else be.q_minus


def mean_X(alpha: float) -> float:
    """E[X]: 2 - alpha - sqrt(2*(alpha^2 - 4*alpha + 2)) up to the critical
    rate (the decreasing root is rejected because X is stochastically
    increasing in alpha), infinite beyond it."""
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if alpha > ALPHA_CRIT:
        return math.inf
    disc = _disc_poly(alpha)
    if disc < 0.0:
        disc = 0.0
    return 2.0 - alpha - math.sqrt(2.0 * disc)


def prob_all_park_limit(alpha: float) -> float:
    """Limiting probability that every car parks:
    exp(alpha/2) * sqrt((alpha^2 - 4*alpha + 2) / (2*(1 - alpha))) up to the
    critical rate, 0 beyond it."""
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if alpha > ALPHA_CRIT:
        return 0.0
    disc = _disc_poly(alpha)
    if disc < 0.0:
        disc = 0.0
    return math.exp(0.5 * alpha) * math.sqrt(disc / (2.0 * (1.0 - alpha)))


@dataclass
class SpineStats:
    """Distributional summary of the per-vertex load Y on the spine.

    Y is the Poisson arrival at a spine vertex plus the overflow of the
    trees hanging off it.  rho = P((X - 1)^+ = 0) enters through the
    hanger-count generating function.
    """

    alpha: float
    mean_y: float
    p_y_zero: float
    rho: float
    prob_all_park: float


def spine_stats(alpha: float) -> SpineStats:
    """Closed forms for the spine load Y and the all-cars-park probability.

    mean_y   = alpha + (E[X] - (1 - p)) / 2
    p_y_zero = sqrt(p) * exp(-alpha/2)
    rho      = -1 + 2*sqrt(p)*exp(alpha/2)
    survival = (1 - mean_y) / p_y_zero below the critical rate (never-
    negative walk formula), 0 above it.  The walk route is checked against
    the direct closed form to 1e-12 before returning.
    """
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if alpha > ALPHA_CRIT:
        p = solve_p(alpha)
        return SpineStats(
            alpha=alpha,
            mean_y=math.inf,
            p_y_zero=math.sqrt(p) * math.exp(-0.5 * alpha),
            rho=-1.0 + 2.0 * math.sqrt(p) * math.exp(0.5 * alpha),
            prob_all_park=0.0,
        )
    p = 1.0 - alpha
    mean_y = alpha + 0.5 * (mean_X(alpha) - (1.0 - p))
    p_y_zero = math.sqrt(p) * math.exp(-0.5 * alpha)
    rho = -1.0 + 2.0 * math.sqrt(p) * math.exp(0.5 * alpha)
    prob = (1.0 - mean_y) / p_y_zero
    direct = prob_all_park_limit(alpha)
    if abs(prob - direct) >= 1e-12:
        raise AnalyticsError(
            f"spine walk route {prob!r} disagrees with closed form {direct!r}"
        )
    return SpineStats(
        alpha=alpha, mean_y=mean_y, p_y_zero=p_y_zero, rho=rho, prob_all_park=prob
    )


def ruin_prob(m: float, q: float) -> float:
    """P(walk stays nonnegative forever) = m / q for i.i.d. steps bounded
    above by 1 with mean m >= 0 and P(step = 1) = q > 0.  Clamped to [0, 1]."""
    if q <= 0.0:
        raise InvalidStepLaw("q = P(step = 1) must be positive")
    if q > 1.0:
        raise InvalidStepLaw(f"q is a probability, got {q}")
    if not 0.0 <= m <= 1.0:
        raise InvalidStepLaw(f"step mean must lie in [0, 1], got {m}")
    return min(1.0, max(0.0, m / q))


@dataclass
class TruncatedPmf:
    """Probability mass function on {0..K} with tracked overflow mass."""

    mass: np.ndarray
    overflow: float

    @property
    def support_cap(self) -> int:
        return len(self.mass) - 1

    def validate(self) -> None:
        if np.any(self.mass < 0.0) or self.overflow < 0.0:
            raise AnalyticsError("negative probability mass")
        total = float(self.mass.sum()) + self.overflow
        if abs(total - 1.0) >= 1e-12:
            raise AnalyticsError(f"mass + overflow = {total!r}, expected 1")

    def pgf(self, s: float) -> float:
        """In-range part of E[s^X]; exact when overflow is negligible."""
        powers = np.power(s, np.arange(len(self.mass), dtype=np.float64))
        return float(self.mass @ powers)

    def mean_lower_bound(self) -> float:
        """First moment of the in-range mass.  A strict lower bound on E[X]
        whenever overflow > 0 (above criticality the true mean is infinite)."""
        return float(self.mass @ np.arange(len(self.mass), dtype=np.float64))

    def tv_distance(self, other: np.ndarray) -> float:
        """Total-variation distance to another pmf on the same support,
        treating overflow as one extra bucket."""
        other = np.asarray(other, dtype=np.float64)
        if len(other) != len(self.mass):
            raise ValueError("support mismatch")
        other_overflow = max(0.0, 1.0 - float(other.sum()))
        return 0.5 * (
            float(np.abs(self.mass - other).sum())
            + abs(self.overflow - other_overflow)
        )


def _poisson_pmf(alpha: float, kmax: int) -> np.ndarray:
    out = np.empty(kmax + 1, dtype=np.float64)
    out[0] = math.exp(-alpha)
    for k in range(1, kmax + 1):
        out[k] = out[k - 1] * (alpha / k)
    return out


def oracle_dist_X(
    alpha: float,
    support_cap: int | None = None,
    tol: float = 1e-12,
    max_iterations: int = 100_000,
) -> TruncatedPmf:
    """Law of the root visits X by fixed-point iteration, no branch formulas.

    Starting from the point mass at 0, repeatedly applies the map

        law(X) <- Po(alpha) (+) law( sum over N children of (X_i - 1)^+ ),
        N ~ Bin(2, 1/2),

    with all convolutions truncated at the support cap and the excess
    tracked as overflow.  Iterate d is the law of the root visits on the
    tree cut at depth d, so convergence is monotone; iteration stops when
    the total-variation change (overflow bucket included) drops below tol.

    Everything at value v depends only on masses at values <= v + 1, so
    truncation never corrupts the low end: in particular mass[0] converges
    to P(X = 0) even when the overflow is substantial (heavy tail above
    criticality, where the truncated mean is only a lower bound).
    """
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    if support_cap is None:
        support_cap = (
            DEFAULT_SUPPORT_SUPERCRITICAL
            if alpha > ALPHA_CRIT
            else DEFAULT_SUPPORT_SUBCRITICAL
        )
    if support_cap < 50:
        raise ValueError(f"support_cap must be >= 50, got {support_cap}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    kk = support_cap
    po = _poisson_pmf(alpha, kk)
    mass = np.zeros(kk + 1, dtype=np.float64)
    mass[0] = 1.0
    overflow = 0.0
    for _ in range(max_iterations):
        # law of (X - 1)^+ on the truncated support
        shifted = np.zeros(kk + 1, dtype=np.float64)
        shifted[0] = mass[0] + mass[1]
        shifted[1:kk] = mass[2:]
        # two-child convolution, then mix over N in {0, 1, 2}
        pair = np.convolve(shifted, shifted)[: kk + 1]
        child_sum = 0.5 * shifted + 0.25 * pair
        child_sum[0] += 0.25
        new_mass = np.convolve(po, child_sum)[: kk + 1]
        new_overflow = max(0.0, 1.0 - float(new_mass.sum()))
        tv = 0.5 * (
            float(np.abs(new_mass - mass).sum()) + abs(new_overflow - overflow)
        )
        mass = new_mass
        overflow = new_overflow
        if tv < tol:
            pmf = TruncatedPmf(mass=mass, overflow=overflow)
            pmf.validate()
            return pmf
    raise NoConvergence(
        f"oracle iteration did not reach tv < {tol} within {max_iterations} steps"
    )


@dataclass
class CriticalQuantities:
    """Bundle of regime-dependent quantities at one arrival rate."""

    alpha: float
    phi: float
    regime: str  # "subcritical" | "supercritical"
    p: float
    s_p: float | None
    c_alpha: float | None
    mean_x: float


def critical_quantities(alpha: float) -> CriticalQuantities:
    """Regime flag plus p, switch point, p-bound and mean flux at alpha."""
    phi = phi_criterion(alpha)
    if alpha <= ALPHA_CRIT:
        return CriticalQuantities(
            alpha=alpha,
            phi=phi,
            regime="subcritical",
            p=1.0 - alpha,
            s_p=None,
            c_alpha=None,
            mean_x=mean_X(alpha),
        )
    p = solve_p(alpha)
    return CriticalQuantities(
        alpha=alpha,
        phi=phi,
        regime="supercritical",
        p=p,
        s_p=s_switch(alpha, p),
        c_alpha=c_upper(alpha),
        mean_x=math.inf,
    )


def report(alpha: float) -> dict:
    """Flat report of every analytic quantity at one arrival rate.

    Infinities and regime-absent entries are represented as None so the
    dict serializes to strict JSON.
    """
    cq = critical_quantities(alpha)
    ss = spine_stats(alpha)

    def _finite(x: float | None) -> float | None:
        if x is None or math.isinf(x):
            return None
        return x

    return {
        "alpha": alpha,
        "regime": cq.regime,
        "phi": cq.phi,
        "p": cq.p,
        "s_p": cq.s_p,
        "c_alpha": cq.c_alpha,
        "mean_X": _finite(cq.mean_x),
        "mean_Y": _finite(ss.mean_y),
        "p_Y_zero": ss.p_y_zero,
        "rho": ss.rho,
        "prob_all_park": ss.prob_all_park,
    }
