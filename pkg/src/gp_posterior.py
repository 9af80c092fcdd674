"""
Exact GP posterior under a Gaussian likelihood with variance nu^2

Two interchangeable views of the same posterior:
- GpState keeps every observed point and extends the Cholesky factor of
  K_t + nu^2 I by one row per observation (bordering, O(t^2) per update)
- ArmPosterior exploits a finite decision set: repeated pulls collapse to
  per-arm counts, so every refresh is O(m^3) whatever t is
"""

import logging

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from errors import MalformedInputError, NumericalError
from kernels import as_point, as_points, cross_kernel, gram_matrix

logger = logging.getLogger(__name__)

DEFAULT_NOISE_VARIANCE = 0.25  # nu = 1/2, the Bernoulli subgaussian constant
VARIANCE_TOL = 1e-10


def _clamp_variance(variance):
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < -VARIANCE_TOL):
        raise NumericalError(
            f"Posterior variance {variance.min():.3e} is negative beyond tolerance")
    return np.maximum(variance, 0.0)


class GpState:
    """
    Incremental GP posterior over the actually observed points

    chol is the lower Cholesky factor of K_t + nu^2 I; z = chol^{-1} y is kept
    alongside it so the mean needs a single triangular solve per query.
    """

    def __init__(self, kernel, noise_variance=DEFAULT_NOISE_VARIANCE, capacity=64):
        if not noise_variance > 0:
            raise MalformedInputError(f"Noise variance must be positive, got {noise_variance}")
        self.kernel = kernel
        self.noise_variance = float(noise_variance)
        self.t = 0
        self._capacity = max(int(capacity), 1)
        self._points = None
        self._y = np.zeros(self._capacity)
        self._z = np.zeros(self._capacity)
        self._chol = np.zeros((self._capacity, self._capacity))

    @property
    def observed_points(self):
        if self._points is None:
            return np.zeros((0, 0))
        return self._points[:self.t]

    @property
    def observations(self):
        return self._y[:self.t]

    @property
    def chol(self):
        return self._chol[:self.t, :self.t]

    def _grow(self):
        capacity = 2 * self._capacity
        chol = np.zeros((capacity, capacity))
        chol[:self.t, :self.t] = self.chol
        self._chol = chol
        self._y = np.concatenate([self._y, np.zeros(capacity - self._capacity)])
        self._z = np.concatenate([self._z, np.zeros(capacity - self._capacity)])
        points = np.zeros((capacity, self._points.shape[1]))
        points[:self.t] = self._points[:self.t]
        self._points = points
        self._capacity = capacity

    def _check_dimension(self, x):
        if self._points is not None and x.size != self._points.shape[1]:
            raise MalformedInputError(
                f"Dimension mismatch: {x.size}-d point against {self._points.shape[1]}-d history")

    def update(self, x, y):
        """
        Append one observation and border the Cholesky factor by one row

        Args:
            x: observed point
            y: observed reward (0 or 1)

        Returns:
            self, for chaining

        Raises:
            NumericalError on a non-positive pivot
        """
        x = as_point(x)
        self._check_dimension(x)
        if self._points is None:
            self._points = np.zeros((self._capacity, x.size))
        elif self.t == self._capacity:
            self._grow()

        # New row of the factor: L r = k_t(x)
        t = self.t
        prior = 1.0
        if t > 0:
            k_vec = cross_kernel(self.kernel, self._points[:t], x[None, :])[:, 0]
            row = solve_triangular(self.chol, k_vec, lower=True, check_finite=False)
        else:
            row = np.zeros(0)

        pivot_sq = prior + self.noise_variance - row @ row
        if not pivot_sq > 0:
            raise NumericalError(
                f"Non-positive Cholesky pivot {pivot_sq:.3e} while adding observation {t + 1}")
        pivot = np.sqrt(pivot_sq)

        # Extend the factor and the whitened targets
        self._chol[t, :t] = row
        self._chol[t, t] = pivot
        self._z[t] = (float(y) - row @ self._z[:t]) / pivot
        self._y[t] = float(y)
        self._points[t] = x
        self.t += 1
        return self

    def _whitened(self, points):
        cross = cross_kernel(self.kernel, self._points[:self.t], points)
        return solve_triangular(self.chol, cross, lower=True, check_finite=False)

    def mean_and_variance(self, points):
        """
        Posterior mean and variance at every row of an (n, d) array
        """
        points = as_points(points)
        # every supported family has k(x, x) = 1
        prior = np.ones(len(points))
        if self.t == 0:
            return np.zeros(len(points)), prior
        self._check_dimension(points[0])
        whitened = self._whitened(points)
        means = whitened.T @ self._z[:self.t]
        variances = _clamp_variance(prior - np.sum(whitened ** 2, axis=0))
        return means, variances

    def mean(self, x):
        """mu_t(x) = k_t(x)^T (K_t + nu^2 I)^{-1} y_t; 0 before any data"""
        means, _ = self.mean_and_variance(as_point(x)[None, :])
        return float(means[0])

    def variance(self, x):
        """sigma_t^2(x) = k(x, x) - k_t(x)^T (K_t + nu^2 I)^{-1} k_t(x)"""
        _, variances = self.mean_and_variance(as_point(x)[None, :])
        return float(variances[0])

    def info_gain_observed(self):
        """1/2 log det(I + nu^-2 K_t), read off the Cholesky diagonal"""
        if self.t == 0:
            return 0.0
        return float(np.sum(np.log(np.diag(self.chol))) - 0.5 * self.t * np.log(self.noise_variance))


class ArmPosterior:
    """
    The same GP posterior, parameterised by per-arm pull and success counts

    With D = diag(sqrt(N)):
        mu = K D (D K D + nu^2 I)^{-1} s,  s_j = S_j / sqrt(N_j)
        sigma^2 = diag(K - K D (D K D + nu^2 I)^{-1} D K)
    """

    def __init__(self, kernel, decision_set, noise_variance=DEFAULT_NOISE_VARIANCE):
        if not noise_variance > 0:
            raise MalformedInputError(f"Noise variance must be positive, got {noise_variance}")
        self.kernel = kernel
        self.decision_set = decision_set
        self.noise_variance = float(noise_variance)
        self.gram = gram_matrix(kernel, decision_set.points)
        self.counts = np.zeros(decision_set.size)
        self.successes = np.zeros(decision_set.size)
        self._cache = None

    @property
    def t(self):
        return int(self.counts.sum())

    def update(self, arm, y):
        arm = self.decision_set.check_arm(arm)
        self.counts[arm] += 1
        self.successes[arm] += float(y)
        self._cache = None
        return self

    def _refresh(self):
        if self._cache is not None:
            return self._cache
        # D K D + nu^2 I
        root = np.sqrt(self.counts)
        system = root[:, None] * self.gram * root[None, :]
        system[np.diag_indices_from(system)] += self.noise_variance
        try:
            factor = cholesky(system, lower=True, check_finite=False)
        except LinAlgError as e:
            raise NumericalError(f"Cholesky of the arm-count system failed: {e}") from e

        scaled_successes = np.divide(
            self.successes, root, out=np.zeros_like(self.successes), where=root > 0)
        whitened = solve_triangular(factor, root[:, None] * self.gram, lower=True, check_finite=False)
        weights = solve_triangular(factor, scaled_successes, lower=True, check_finite=False)

        means = whitened.T @ weights
        variances = _clamp_variance(np.diag(self.gram) - np.sum(whitened ** 2, axis=0))
        # gamma_t = 1/2 log det(I + nu^-2 D K D)
        info_gain = float(np.sum(np.log(np.diag(factor)))
                          - 0.5 * len(root) * np.log(self.noise_variance))
        self._cache = (means, variances, max(info_gain, 0.0))
        return self._cache

    def means(self):
        return self._refresh()[0]

    def variances(self):
        return self._refresh()[1]

    def info_gain_observed(self):
        return self._refresh()[2]

    def mean(self, x):
        return float(self.means()[self.decision_set.index_of(x)])

    def variance(self, x):
        return float(self.variances()[self.decision_set.index_of(x)])


def greedy_info_gain_curve(kernel, decision_set, horizon, noise_variance=DEFAULT_NOISE_VARIANCE):
    """
    Greedy information-gain values for every prefix length 1..horizon

    Each step adds (possibly again) the arm with the largest current posterior
    variance, lowest index on ties; the marginal gain of that step is
    1/2 log(1 + sigma^2 / nu^2).

    Returns:
        array whose entry t-1 is the greedy value after t selections
    """
    if decision_set.size == 0:
        raise MalformedInputError("Greedy information gain needs a non-empty decision set")
    if horizon < 1:
        raise MalformedInputError(f"Greedy information gain needs t >= 1, got {horizon}")
    posterior = ArmPosterior(kernel, decision_set, noise_variance)
    curve = np.zeros(int(horizon))
    total = 0.0
    for step in range(int(horizon)):
        variances = posterior.variances()
        arm = int(np.argmax(variances))
        total += 0.5 * np.log1p(variances[arm] / noise_variance)
        curve[step] = total
        # Variances do not depend on rewards
        posterior.update(arm, 0)
    return curve


def max_info_gain_greedy(kernel, decision_set, t, noise_variance=DEFAULT_NOISE_VARIANCE):
    """
    Greedy approximation of the maximum information gain gamma_t

    Greedy maximisation of this submodular objective is within a (1 - 1/e)
    factor of the true maximum.
    """
    return float(greedy_info_gain_curve(kernel, decision_set, t, noise_variance)[-1])
