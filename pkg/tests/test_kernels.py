import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from errors import MalformedInputError
from kernels import KernelSpec, cross_kernel, gram_matrix, kernel_eval, psd_check

ALL_SPECS = [
    KernelSpec.squared_exponential(0.7),
    KernelSpec.matern(0.5, 0.7),
    KernelSpec.matern(1.5, 0.7),
    KernelSpec.matern(2.5, 0.7),
    KernelSpec.delta(),
]


def test_sqexp_values():
    se = KernelSpec.squared_exponential(1.0)
    assert kernel_eval(se, [0.0], [0.0]) == 1.0
    assert kernel_eval(se, [0.0], [1.0]) == pytest.approx(np.exp(-0.5), abs=1e-12)


def test_delta_distinct_points_is_zero():
    assert kernel_eval(KernelSpec.delta(), [0.3], [0.5]) == 0.0
    assert kernel_eval(KernelSpec.delta(), [0.3], [0.3]) == 1.0


@pytest.mark.parametrize('spec', ALL_SPECS, ids=lambda s: s.label)
def test_unit_diagonal_and_bounded(spec):
    rng = np.random.default_rng(3)
    points = rng.uniform(-1, 1, size=(12, 2))
    values = cross_kernel(spec, points, points)
    assert_allclose(np.diag(values), 1.0)
    assert values.max() <= 1.0
    assert values.min() >= 0.0


def test_matern_closed_forms():
    r = 0.8
    half = KernelSpec.matern(0.5, 1.0)
    three_halves = KernelSpec.matern(1.5, 1.0)
    five_halves = KernelSpec.matern(2.5, 1.0)
    s3 = np.sqrt(3) * r
    s5 = np.sqrt(5) * r
    assert kernel_eval(half, [0.0], [r]) == pytest.approx(np.exp(-r))
    assert kernel_eval(three_halves, [0.0], [r]) == pytest.approx((1 + s3) * np.exp(-s3))
    assert kernel_eval(five_halves, [0.0], [r]) == pytest.approx((1 + s5 + s5 ** 2 / 3) * np.exp(-s5))


def test_dimension_mismatch_raises():
    with pytest.raises(MalformedInputError):
        kernel_eval(KernelSpec.squared_exponential(1.0), [0.0], [0.0, 1.0])


@pytest.mark.parametrize('kwargs', [
    {'family': 'sqexp', 'lengthscale': 0.0},
    {'family': 'sqexp', 'lengthscale': -1.0},
    {'family': 'matern', 'nu': 3.5, 'lengthscale': 1.0},
    {'family': 'delta', 'lengthscale': 1.0},
    {'family': 'periodic', 'lengthscale': 1.0},
])
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(MalformedInputError):
        KernelSpec(**kwargs)


def test_spec_dict_form():
    spec = KernelSpec.from_dict({'family': 'matern', 'nu': 1.5, 'lengthscale': 0.5})
    assert spec == KernelSpec.matern(1.5, 0.5)
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_gram_delta_is_identity():
    assert_array_equal(gram_matrix(KernelSpec.delta(), [[0.1], [0.2], [0.3]]), np.eye(3))


@pytest.mark.parametrize('spec', ALL_SPECS, ids=lambda s: s.label)
def test_gram_identical_points(spec):
    assert_array_equal(gram_matrix(spec, [[0.4], [0.4]]), np.ones((2, 2)))


def test_gram_sqexp_two_points():
    e = np.exp(-0.5)
    assert_allclose(gram_matrix(KernelSpec.squared_exponential(1.0), [[0.0], [1.0]]),
                    [[1.0, e], [e, 1.0]])


@pytest.mark.parametrize('spec', ALL_SPECS, ids=lambda s: s.label)
def test_gram_symmetric_psd(spec):
    points = np.random.default_rng(11).uniform(0, 1, size=(30, 3))
    gram = gram_matrix(spec, points)
    assert_array_equal(gram, gram.T)
    assert psd_check(gram, tol=1e-8)


def test_psd_check_examples():
    assert psd_check(np.eye(3), tol=0.0)
    assert psd_check([[1.0, 1.0], [1.0, 1.0]], tol=1e-12)
    assert not psd_check([[1.0, 2.0], [2.0, 1.0]], tol=1e-12)


def test_psd_check_rejects_non_square():
    with pytest.raises(MalformedInputError):
        psd_check(np.ones((2, 3)))


@pytest.mark.parametrize('spec', ALL_SPECS, ids=lambda s: s.label)
def test_kernel_eval_exactly_symmetric(spec):
    rng = np.random.default_rng(21)
    for _ in range(200):
        x, x_prime = rng.normal(size=(2, 3))
        assert kernel_eval(spec, x, x_prime) == kernel_eval(spec, x_prime, x)
