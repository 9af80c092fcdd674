"""
Concentration machinery for Bernoulli rewards

Two families of confidence sets:
- self-normalized subgaussian envelopes around a GP posterior mean,
  mu +/- (B + lambda sqrt(2(gamma + 1 + log(1/delta)))) sigma
- Bernoulli-KL indices, the largest (smallest) q with N d(mu, q) <= threshold
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import rel_entr

from errors import MalformedInputError

BISECTION_TOL = 1e-9
BISECTION_MAX_ITER = 128
BERNOULLI_SUBGAUSSIAN = 0.5  # a Bernoulli variable is 1/2-subgaussian


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise MalformedInputError(
                f"Interval lower end {self.lower} exceeds upper end {self.upper}")

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class KlThresholdParams:
    """Constants of the log(t/delta) + log log(t/delta) exploration budget"""
    c1: float = 1.0
    c2: float = 3.0
    delta: float = 0.05

    def __post_init__(self):
        if not self.c1 > 0:
            raise MalformedInputError(f"c1 must be positive, got {self.c1}")
        if not self.c2 >= 0:
            raise MalformedInputError(f"c2 must be non-negative, got {self.c2}")
        if not 0 < self.delta < 1:
            raise MalformedInputError(f"delta must lie in (0, 1), got {self.delta}")

    @classmethod
    def practical(cls, delta=0.05):
        """c2 = 0, the variant usually run in practice"""
        return cls(c1=1.0, c2=0.0, delta=delta)

    def union_corrected(self, num_arms):
        """Same constants with delta split evenly over the arms"""
        return replace(self, delta=self.delta / num_arms)


def _check_unit(name, value):
    array = np.asarray(value, dtype=float)
    if np.any(~((array >= 0.0) & (array <= 1.0))):
        raise MalformedInputError(f"{name} must lie in [0, 1], got {value}")
    return array


def bernoulli_kl(a, b):
    """
    Bernoulli KL divergence d(a, b) = a log(a/b) + (1-a) log((1-a)/(1-b))

    Uses 0 log(0/.) = 0 and returns +inf when b is 0 or 1 and a != b.
    Works elementwise on arrays; scalars come back as floats.
    """
    a_arr = _check_unit('a', a)
    b_arr = _check_unit('b', b)
    divergence = rel_entr(a_arr, b_arr) + rel_entr(1.0 - a_arr, 1.0 - b_arr)
    if np.ndim(divergence) == 0:
        return float(divergence)
    return divergence


def kl_threshold(t, params):
    """
    c1 log(t/delta) + c2 max(0, log log(t/delta))

    The log-log term is clamped to zero whenever log(t/delta) <= 1.
    """
    if t < 1:
        raise MalformedInputError(f"Round index t must be >= 1, got {t}")
    log_term = np.log(t / params.delta)
    loglog = np.log(log_term) if log_term > 1.0 else 0.0
    return float(params.c1 * log_term + params.c2 * max(0.0, loglog))


def _budget_exceeded(means, counts, candidates, threshold):
    return counts * (rel_entr(means, candidates) + rel_entr(1.0 - means, 1.0 - candidates)) > threshold


def kl_upper_indices(means, counts, threshold):
    """
    Vectorized KL upper index: largest q >= mean with count d(mean, q) <= threshold

    Bisection on [mean, 1], where d(mean, .) is increasing. The returned value
    is the feasible end of the final bracket (width <= 1e-9, at most 128 steps).

    Args:
        means: empirical means in [0, 1]
        counts: sample counts (or pseudocounts) >= 0
        threshold: exploration budget >= 0, scalar or broadcastable

    Returns:
        array of indices in [0, 1]
    """
    means = _check_unit('mean', means)
    counts = np.asarray(counts, dtype=float)
    means, counts, threshold = np.broadcast_arrays(means, counts, np.asarray(threshold, dtype=float))
    result = np.ones(means.shape)

    informative = counts > 0
    flat = informative & (threshold <= 0)
    result[flat] = means[flat]

    active = informative & (threshold > 0) & (means < 1.0)
    if np.any(active):
        mean = means[active]
        count = counts[active]
        budget = threshold[active]
        lo = mean.copy()
        hi = np.ones_like(mean)
        for _ in range(BISECTION_MAX_ITER):
            if np.all(hi - lo <= BISECTION_TOL):
                break
            mid = 0.5 * (lo + hi)
            over = _budget_exceeded(mean, count, mid, budget)
            lo = np.where(over, lo, mid)
            hi = np.where(over, mid, hi)
        result[active] = lo
    return result


def kl_lower_indices(means, counts, threshold):
    """
    Vectorized KL lower index: smallest q <= mean with count d(mean, q) <= threshold

    Mirror image of kl_upper_indices; unexplored arms get 0.
    """
    means = _check_unit('mean', means)
    counts = np.asarray(counts, dtype=float)
    means, counts, threshold = np.broadcast_arrays(means, counts, np.asarray(threshold, dtype=float))
    result = np.zeros(means.shape)

    informative = counts > 0
    flat = informative & (threshold <= 0)
    result[flat] = means[flat]

    active = informative & (threshold > 0) & (means > 0.0)
    if np.any(active):
        mean = means[active]
        count = counts[active]
        budget = threshold[active]
        lo = np.zeros_like(mean)
        hi = mean.copy()
        for _ in range(BISECTION_MAX_ITER):
            if np.all(hi - lo <= BISECTION_TOL):
                break
            mid = 0.5 * (lo + hi)
            over = _budget_exceeded(mean, count, mid, budget)
            lo = np.where(over, mid, lo)
            hi = np.where(over, hi, mid)
        result[active] = hi
    return result


def kl_upper_index(mean, count, threshold):
    """Scalar KL upper index; count = 0 gives the vacuous value 1"""
    return float(kl_upper_indices(mean, count, threshold))


def kl_lower_index(mean, count, threshold):
    """Scalar KL lower index; count = 0 gives the vacuous value 0"""
    return float(kl_lower_indices(mean, count, threshold))


def subgaussian_width(B, lam, gamma, delta):
    """
    Confidence multiplier B + lambda sqrt(2 (gamma + 1 + log(1/delta)))
    """
    if not (B > 0 and lam > 0):
        raise MalformedInputError(f"B and lambda must be positive, got B={B}, lambda={lam}")
    if gamma < 0:
        raise MalformedInputError(f"Information gain must be non-negative, got {gamma}")
    if not 0 < delta < 1:
        raise MalformedInputError(f"delta must lie in (0, 1), got {delta}")
    return float(B + lam * np.sqrt(2.0 * (gamma + 1.0 + np.log(1.0 / delta))))


def subgaussian_bounds(means, variances, width, clipped=False):
    """
    Lower/upper arrays mean -/+ width * sigma, optionally intersected with [0, 1]
    """
    means = np.asarray(means, dtype=float)
    half = width * np.sqrt(np.maximum(np.asarray(variances, dtype=float), 0.0))
    lower = means - half
    upper = means + half
    if clipped:
        lower = np.clip(lower, 0.0, 1.0)
        upper = np.clip(upper, 0.0, 1.0)
        # an envelope lying wholly outside [0, 1] collapses onto the nearest end
        upper = np.maximum(upper, lower)
    return lower, upper


def subgaussian_interval(posterior, x, B, lam=BERNOULLI_SUBGAUSSIAN, delta=0.05, clipped=False):
    """
    Self-normalized interval around the GP posterior mean at x

    The unclipped interval may leave [0, 1]; that is the estimator defect the
    experiments measure, so clipping is opt-in.

    Args:
        posterior: GpState (anything with mean, variance and info_gain_observed)
        x: query point
        B: RKHS norm bound
        lam: subgaussian constant
        delta: confidence level
        clipped: intersect the interval with [0, 1]
    """
    width = subgaussian_width(B, lam, posterior.info_gain_observed(), delta)
    lower, upper = subgaussian_bounds(posterior.mean(x), posterior.variance(x), width, clipped)
    return ConfidenceInterval(float(lower), float(upper))


def kl_interval(stats, arm, t, params, union_arms=None):
    """
    Two-sided KL interval for one arm from its exact sufficient statistics

    Args:
        stats: ArmStats
        arm: arm index
        t: round index used in the threshold
        params: KlThresholdParams
        union_arms: when given, delta is divided by this many arms

    Returns:
        ConfidenceInterval; (0, 1) for an unexplored arm
    """
    mean = stats.empirical_mean(arm)
    if mean is None:
        return ConfidenceInterval(0.0, 1.0)
    if union_arms:
        params = params.union_corrected(union_arms)
    threshold = kl_threshold(t, params)
    count = stats.count(arm)
    return ConfidenceInterval(
        kl_lower_index(mean, count, threshold),
        kl_upper_index(mean, count, threshold),
    )
