"""
Bernoulli-native estimators

ArmStats holds the exact per-arm sufficient statistics of a finite decision
set. BetaField shares samples across points through the kernel:
    alpha_t(x) = alpha_0 + sum_s y_s k(x, x_s)
    beta_t(x)  = beta_0  + sum_s (1 - y_s) k(x, x_s)
so its mean alpha / (alpha + beta) never leaves the Bernoulli parameter range.
"""

from typing import Optional

import numpy as np

from errors import MalformedInputError
from kernels import as_point, cross_kernel, gram_matrix


class ArmStats:
    """Pull and success counts for every arm"""

    def __init__(self, num_arms):
        if num_arms < 1:
            raise MalformedInputError(f"Need at least one arm, got {num_arms}")
        self.counts = np.zeros(int(num_arms), dtype=np.int64)
        self.successes = np.zeros(int(num_arms), dtype=np.int64)

    @property
    def num_arms(self):
        return len(self.counts)

    @property
    def t(self):
        return int(self.counts.sum())

    def _check_arm(self, arm):
        if not 0 <= arm < self.num_arms:
            raise MalformedInputError(f"Arm index {arm} out of range [0, {self.num_arms})")

    def update(self, arm, y):
        """Record one reward y in {0, 1} for an arm"""
        self._check_arm(arm)
        self.counts[arm] += 1
        if y == 1:
            self.successes[arm] += 1
        return self

    def count(self, arm):
        return int(self.counts[arm])

    def empirical_mean(self, arm) -> Optional[float]:
        """
        S/N for an explored arm; None marks an unexplored arm
        """
        self._check_arm(arm)
        if self.counts[arm] == 0:
            return None
        return float(self.successes[arm] / self.counts[arm])

    def empirical_means(self):
        """Array of S/N with NaN for unexplored arms"""
        return np.divide(self.successes, self.counts,
                         out=np.full(self.num_arms, np.nan), where=self.counts > 0)


class BetaField:
    """
    Kernel-weighted Beta parameters over the decision set

    The full (point, reward) history is retained for audit and for queries
    at arbitrary points; when a decision set is given the parameters of its
    arms are also cached and updated in O(m) per observation.
    """

    def __init__(self, kernel, decision_set=None, alpha0=1.0, beta0=1.0):
        if not (alpha0 > 0 and beta0 > 0):
            raise MalformedInputError(
                f"Beta priors must be positive, got alpha0={alpha0}, beta0={beta0}")
        self._setup(kernel, decision_set, float(alpha0), float(beta0))
        self.vanishing = False

    @classmethod
    def vanishing_prior(cls, kernel, decision_set=None):
        """
        The alpha0 = beta0 -> 0+ limit

        The mean is alpha / (alpha + beta) wherever any sample weight has
        arrived and the limit value 1/2 elsewhere; under the Delta kernel it
        equals S/N exactly.
        """
        field = cls.__new__(cls)
        field._setup(kernel, decision_set, 0.0, 0.0)
        field.vanishing = True
        return field

    def _setup(self, kernel, decision_set, alpha0, beta0):
        self.kernel = kernel
        self.decision_set = decision_set
        self.alpha0 = alpha0
        self.beta0 = beta0
        self.history = []
        if decision_set is not None:
            self._gram = gram_matrix(kernel, decision_set.points)
            self.arm_alpha = np.full(decision_set.size, alpha0)
            self.arm_beta = np.full(decision_set.size, beta0)
        else:
            self._gram = None

    def update(self, x, y):
        """Add one (point, reward) sample"""
        x = as_point(x)
        self.history.append((x, int(y)))
        if self.decision_set is not None:
            arm = self.decision_set.index_of(x)
            weights = self._gram[:, arm]
            if y == 1:
                self.arm_alpha += weights
            else:
                self.arm_beta += weights
        return self

    def update_arm(self, arm, y):
        """Add one sample at a decision-set arm"""
        if self.decision_set is None:
            raise MalformedInputError("update_arm needs a BetaField built over a decision set")
        return self.update(self.decision_set[self.decision_set.check_arm(arm)], y)

    def params(self, x):
        """
        (alpha, beta) at any point, recomputed from the full history
        """
        x = as_point(x)
        if not self.history:
            return self.alpha0, self.beta0
        points = np.array([point for point, _ in self.history])
        rewards = np.array([reward for _, reward in self.history], dtype=float)
        weights = cross_kernel(self.kernel, points, x[None, :])[:, 0]
        alpha = self.alpha0 + float(np.sum(rewards * weights))
        beta = self.beta0 + float(np.sum((1.0 - rewards) * weights))
        return alpha, beta

    def _mean_from(self, alpha, beta):
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        total = alpha + beta
        if self.vanishing:
            return np.divide(alpha, total, out=np.full(np.shape(total), 0.5), where=total > 0)
        return alpha / total

    def mean(self, x):
        """alpha / (alpha + beta) at x"""
        alpha, beta = self.params(x)
        return float(self._mean_from(alpha, beta))

    def pseudocount(self, x):
        """alpha + beta - alpha0 - beta0: kernel-weighted sample mass at x"""
        alpha, beta = self.params(x)
        return alpha + beta - self.alpha0 - self.beta0

    def arm_means(self):
        """Cached means of every decision-set arm"""
        return self._mean_from(self.arm_alpha, self.arm_beta)

    def arm_pseudocounts(self):
        """Cached pseudocounts of every decision-set arm"""
        return self.arm_alpha + self.arm_beta - self.alpha0 - self.beta0
