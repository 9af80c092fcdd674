"""
RKHS test functions and the Bernoulli bandit environment

Functions are finite kernel expansions f(.) = sum_i w_i k(c_i, .) whose RKHS
norm and range over the decision set are certified at construction time.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from confidence_bounds import bernoulli_kl
from errors import ConstructionError, MalformedInputError, NumericalError
from kernels import KernelSpec, as_point, as_points, cross_kernel, gram_matrix

logger = logging.getLogger(__name__)

QUADRATIC_FORM_TOL = 1e-10


class DecisionSet:
    """Finite set of pairwise distinct points sharing one dimension"""

    def __init__(self, points):
        self.points = as_points(points)
        self.points.setflags(write=False)
        if len(self.points) < 2:
            raise MalformedInputError(
                f"A decision set needs at least 2 points, got {len(self.points)}")

        self._index = {}
        for i, point in enumerate(self.points):
            key = point.tobytes()
            if key in self._index:
                raise MalformedInputError(
                    f"Decision set points must be distinct: point {i} repeats point {self._index[key]}")
            self._index[key] = i

    @classmethod
    def grid(cls, low, high, num):
        """Evenly spaced 1-D grid including both ends"""
        if num < 2:
            raise MalformedInputError(f"A grid needs at least 2 points, got {num}")
        return cls(np.linspace(low, high, int(num))[:, None])

    @property
    def size(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.points.shape[1]

    def __len__(self):
        return self.size

    def __getitem__(self, arm):
        return self.points[arm]

    def index_of(self, x):
        """
        Arm index of a point, by exact coordinate equality

        Raises:
            MalformedInputError if x is not in the set
        """
        point = as_point(x)
        if point.size != self.dimension:
            raise MalformedInputError(
                f"Dimension mismatch: {point.size}-d point against {self.dimension}-d decision set")
        arm = self._index.get(point.tobytes())
        if arm is None:
            raise MalformedInputError(f"Point {point.tolist()} is not in the decision set")
        return arm

    def check_arm(self, arm):
        if not (0 <= int(arm) < self.size):
            raise MalformedInputError(f"Arm index {arm} out of range [0, {self.size})")
        return int(arm)


@dataclass(frozen=True)
class RkhsFunction:
    """Finite kernel expansion with a certified norm bound"""
    kernel: KernelSpec
    centers: np.ndarray
    weights: np.ndarray
    norm_bound: float

    def __call__(self, x):
        return f_eval(self, x)

    def values(self, points):
        """f evaluated at every point of an (n, d) array"""
        return cross_kernel(self.kernel, points, self.centers) @ self.weights


def f_eval(f, x):
    """
    Evaluate f(x) = sum_i w_i k(c_i, x)
    """
    x = as_point(x)
    if x.size != f.centers.shape[1]:
        raise MalformedInputError(
            f"Dimension mismatch: {x.size}-d point against {f.centers.shape[1]}-d centers")
    return float(f.values(x[None, :])[0])


def rkhs_norm(f):
    """
    RKHS norm sqrt(w^T K_c w) of a kernel expansion

    Raises:
        NumericalError when the quadratic form is clearly negative
    """
    gram = gram_matrix(f.kernel, f.centers)
    quad = float(f.weights @ gram @ f.weights)
    if quad < -QUADRATIC_FORM_TOL:
        raise NumericalError(f"Negative RKHS quadratic form {quad:.3e}; Gram matrix is broken")
    return float(np.sqrt(max(quad, 0.0)))


def make_bounded_function(kernel, centers, raw_weights, B, decision_set):
    """
    Scale raw weights so the RKHS norm is at most B, then certify the range

    Only positive scaling is applied, so the result stays in the RKHS.

    Args:
        kernel: KernelSpec
        centers: list of center points
        raw_weights: one weight per center
        B: norm bound, > 0
        decision_set: DecisionSet the range is certified on

    Returns:
        RkhsFunction with rkhs_norm <= B and 0 <= f(x) <= 1 on the set

    Raises:
        ConstructionError listing every point where f leaves [0, 1]
    """
    if not B > 0:
        raise MalformedInputError(f"Norm bound B must be positive, got {B}")
    centers = as_points(centers)
    weights = np.asarray(raw_weights, dtype=float).ravel()
    if len(weights) != len(centers):
        raise MalformedInputError(
            f"Got {len(weights)} weights for {len(centers)} centers")
    if centers.shape[1] != decision_set.dimension:
        raise MalformedInputError(
            f"Dimension mismatch: {centers.shape[1]}-d centers against "
            f"{decision_set.dimension}-d decision set")

    raw = RkhsFunction(kernel, centers, weights, float(B))
    norm = rkhs_norm(raw)
    scale = 1.0 if norm <= B else B / norm
    f = RkhsFunction(kernel, centers, scale * weights, float(B))
    if scale < 1.0:
        logger.info("Scaled weights by %.6g to meet norm bound B=%g (raw norm %.6g)", scale, B, norm)

    values = f.values(decision_set.points)
    bad = np.flatnonzero((values < 0.0) | (values > 1.0))
    if len(bad):
        offenders = ', '.join(
            f"x={decision_set.points[i].tolist()} f={values[i]:.6g}" for i in bad)
        raise ConstructionError(
            f"Function leaves [0, 1] on the decision set after scaling; "
            f"supply different raw weights. Offending points: {offenders}")
    return f


class BanditEnvironment:
    """
    Bernoulli bandit over a finite decision set

    f is evaluated once for every arm at construction, so regret accounting
    costs O(1) per step.
    """

    def __init__(self, f, decision_set):
        self.f = f
        self.decision_set = decision_set
        self.arm_values = f.values(decision_set.points)
        self.arm_values.setflags(write=False)
        self.optimal_arm = int(np.argmax(self.arm_values))
        self.optimal_value = float(self.arm_values[self.optimal_arm])

    @property
    def optimum(self) -> Tuple[int, float]:
        return self.optimal_arm, self.optimal_value

    @property
    def num_arms(self):
        return self.decision_set.size

    def pull(self, arm, rng):
        """Bernoulli reward for an arm index; one uniform draw"""
        arm = self.decision_set.check_arm(arm)
        return int(rng.random() < self.arm_values[arm])

    def gaps(self):
        return self.optimal_value - self.arm_values


def sample_reward(env, x, rng):
    """
    Draw y ~ Ber(f(x)) for a decision-set point, consuming one uniform draw
    """
    arm = env.decision_set.index_of(x)
    return env.pull(arm, rng)


def cumulative_regret(env, actions):
    """
    T f(x*) - sum_t f(x_t) for a sequence of arm indices
    """
    actions = np.asarray(actions, dtype=int)
    if actions.size == 0:
        return 0.0
    if actions.min() < 0 or actions.max() >= env.num_arms:
        raise MalformedInputError(f"Action indices must lie in [0, {env.num_arms})")
    # summing gaps keeps each term non-negative
    return float(np.sum(env.gaps()[actions]))


def kl_regret_constant(env):
    """
    Instance-dependent coefficient sum_x gap(x) / d(f(x), f(x*)) of log T

    Arms tied with the optimum contribute nothing; an optimum at 1 makes
    d infinite and the arm's contribution zero.
    """
    total = 0.0
    for value, gap in zip(env.arm_values, env.gaps()):
        if gap <= 0:
            continue
        divergence = bernoulli_kl(float(np.clip(value, 0.0, 1.0)), env.optimal_value)
        if np.isfinite(divergence):
            total += gap / divergence
    return total


def igp_ucb_regret_scale(B, gamma, horizon, delta):
    """
    Order of the worst-case IGP-UCB guarantee, constants dropped:
    B sqrt(gamma_T) + sqrt(T gamma_T (gamma_T + log(1/delta)))
    """
    return B * np.sqrt(gamma) + np.sqrt(horizon * gamma * (gamma + np.log(1.0 / delta)))
