"""
Bounded kernels, Gram matrices and PSD validation

Every family is normalised so that k(x, x) = 1, which keeps the kernel
bounded by one on the whole decision set.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh
from scipy.spatial.distance import cdist

from errors import MalformedInputError

SQUARED_EXPONENTIAL = 'sqexp'
MATERN = 'matern'
DELTA = 'delta'

FAMILIES = (SQUARED_EXPONENTIAL, MATERN, DELTA)
MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """A member of one of the supported kernel families"""
    family: str
    lengthscale: Optional[float] = None  # unused by the Delta kernel
    nu: Optional[float] = None  # Matern smoothness only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise MalformedInputError(
                f"Unknown kernel family '{self.family}'. Expected one of {FAMILIES}")
        if self.family == DELTA:
            if self.lengthscale is not None or self.nu is not None:
                raise MalformedInputError("Delta kernel takes no parameters")
            return
        if self.lengthscale is None or not np.isfinite(self.lengthscale) or self.lengthscale <= 0:
            raise MalformedInputError(
                f"Kernel lengthscale must be a finite positive number, got {self.lengthscale}")
        if self.family == MATERN:
            if self.nu not in MATERN_SMOOTHNESS:
                raise MalformedInputError(
                    f"Matern smoothness must be one of {MATERN_SMOOTHNESS}, got {self.nu}")
        elif self.nu is not None:
            raise MalformedInputError("Only the Matern family takes a smoothness parameter")

    @classmethod
    def squared_exponential(cls, lengthscale):
        return cls(SQUARED_EXPONENTIAL, lengthscale=float(lengthscale))

    @classmethod
    def matern(cls, nu, lengthscale):
        return cls(MATERN, lengthscale=float(lengthscale), nu=float(nu))

    @classmethod
    def delta(cls):
        return cls(DELTA)

    @classmethod
    def from_dict(cls, data):
        """
        Build a spec from its config-file form

        Args:
            data: e.g. {"family": "matern", "nu": 1.5, "lengthscale": 0.5}
        """
        family = data.get('family')
        if family == SQUARED_EXPONENTIAL:
            return cls.squared_exponential(data.get('lengthscale'))
        if family == MATERN:
            return cls.matern(data.get('nu'), data.get('lengthscale'))
        if family == DELTA:
            return cls.delta()
        raise MalformedInputError(
            f"Unknown kernel family '{family}'. Expected one of {FAMILIES}")

    def to_dict(self):
        if self.family == DELTA:
            return {'family': DELTA}
        if self.family == MATERN:
            return {'family': MATERN, 'nu': self.nu, 'lengthscale': self.lengthscale}
        return {'family': SQUARED_EXPONENTIAL, 'lengthscale': self.lengthscale}

    @property
    def label(self):
        if self.family == DELTA:
            return 'delta'
        if self.family == MATERN:
            return f"matern(nu={self.nu:g}, l={self.lengthscale:g})"
        return f"sqexp(l={self.lengthscale:g})"


def as_point(x):
    """Coerce one point to a finite 1-D float array"""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.ndim != 1 or point.size < 1:
        raise MalformedInputError(f"A point must be a non-empty vector, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise MalformedInputError(f"Point coordinates must be finite, got {point}")
    return point


def as_points(points):
    """Coerce a list of points to a finite (n, d) float array"""
    array = np.asarray(points, dtype=float)
    if array.ndim == 1:
        # a bare list of scalars is a list of 1-D points
        array = array[:, None]
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise MalformedInputError(
            f"Expected a non-empty list of points with consistent dimension, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise MalformedInputError("Point coordinates must be finite")
    return array


def _from_sq_distance(spec, sq_dist):
    if spec.family == SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * sq_dist / spec.lengthscale ** 2)

    r = np.sqrt(sq_dist) / spec.lengthscale
    if spec.nu == 0.5:
        return np.exp(-r)
    if spec.nu == 1.5:
        scaled = np.sqrt(3.0) * r
        return (1.0 + scaled) * np.exp(-scaled)
    scaled = np.sqrt(5.0) * r
    return (1.0 + scaled + scaled ** 2 / 3.0) * np.exp(-scaled)


def cross_kernel(spec, left, right):
    """
    Kernel values between two point lists

    Args:
        spec: KernelSpec
        left: (n, d) points
        right: (p, d) points

    Returns:
        (n, p) matrix with entry (i, j) = k(left_i, right_j)
    """
    left = as_points(left)
    right = as_points(right)
    if left.shape[1] != right.shape[1]:
        raise MalformedInputError(
            f"Dimension mismatch: {left.shape[1]}-d points against {right.shape[1]}-d points")

    if spec.family == DELTA:
        # bitwise coordinate equality, decision-set points are canonical
        return np.all(left[:, None, :] == right[None, :, :], axis=2).astype(float)

    sq_dist = cdist(left, right, metric='sqeuclidean')
    return _from_sq_distance(spec, sq_dist)


def kernel_eval(spec, x, x_prime):
    """
    Evaluate k(x, x') for a single pair of points

    Returns:
        float in [0, 1]
    """
    x = as_point(x)
    x_prime = as_point(x_prime)
    if x.shape != x_prime.shape:
        raise MalformedInputError(
            f"Dimension mismatch: {x.size}-d point against {x_prime.size}-d point")
    return float(cross_kernel(spec, x[None, :], x_prime[None, :])[0, 0])


def gram_matrix(spec, points):
    """
    Gram matrix K with K[i, j] = k(points_i, points_j)

    The matrix is exactly symmetric with a unit diagonal.
    """
    points = as_points(points)
    gram = cross_kernel(spec, points, points)
    # cdist is symmetric already, this pins it against any backend rounding
    gram = np.triu(gram) + np.triu(gram, 1).T
    np.fill_diagonal(gram, 1.0)
    return gram


def psd_check(matrix, tol=1e-8):
    """
    True iff the smallest eigenvalue of a symmetric matrix is >= -tol
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise MalformedInputError(f"psd_check needs a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] == 0:
        return True
    smallest = eigvalsh(matrix, subset_by_index=[0, 0])[0]
    return bool(smallest >= -tol)
