import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from kcq.errors import DomainError, RootBracketingError, ShapeError
from kcq.randomfield import (eigenfunction, eigenfunction_centered, field_fluctuation, field_value,
                             kl_eigenpairs, make_kl_field, pointwise_variance, _bisect)

A, C = 3.0, 0.333


@pytest.fixture(scope="module")
def field():
    return make_kl_field()


def test_eigen_residuals(field):
    for i, w in enumerate(field.omegas, start=1):
        if i % 2:
            res = abs(w * math.tan(A * w) - C)
        else:
            res = abs(w + C * math.tan(A * w))
        assert res < 1e-10, (i, res)


def _scan_roots(fn, upper, step=1e-4):
    # dense scan for sign changes, discarding the jumps across tangent poles
    grid = np.arange(step, upper, step)
    vals = fn(grid)
    roots = []
    for j in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        if abs(vals[j]) < 1 and abs(vals[j + 1]) < 1:
            roots.append(brentq(fn, grid[j], grid[j + 1], xtol=1e-15))
    return roots


def test_roots_match_grid_scan_oracle(field):
    upper = field.omegas[-1] + 0.1
    odd = _scan_roots(lambda w: w * np.tan(A * w) - C, upper)
    even = _scan_roots(lambda w: w + C * np.tan(A * w), upper)
    np.testing.assert_allclose(field.omegas[0::2], odd[:5], rtol=1e-12)
    np.testing.assert_allclose(field.omegas[1::2], even[:5], rtol=1e-12)
    # first odd root of w tan(3w) = 0.333, frozen from the scan
    assert field.omegas[0] == pytest.approx(0.2866731576591, abs=1e-12)


def test_kappas_positive_and_decreasing(field):
    assert np.all(field.kappas > 0)
    assert np.all(np.diff(field.kappas) < 0)
    assert field.kappas[-1] < field.kappas[0]
    np.testing.assert_allclose(field.kappas, 2 * C * 0.04 / (field.omegas ** 2 + C ** 2), rtol=1e-15)


def test_eigenpair_argument_errors():
    with pytest.raises(DomainError):
        kl_eigenpairs(3.0, -1.0, 0.2, 4)
    with pytest.raises(DomainError):
        kl_eigenpairs(3.0, 0.3, 0.2, 0)
    with pytest.raises(RootBracketingError):
        _bisect(lambda w: 1.0 + w * w, 0.0, 1.0, 7)


def test_eigenfunction_at_center(field):
    w1 = field.omegas[0]
    assert eigenfunction_centered(field, 1, 0.0) == pytest.approx(1 / math.sqrt(A + math.sin(2 * w1 * A) / (2 * w1)),
                                                                  rel=1e-15)
    assert eigenfunction_centered(field, 2, 0.0) == 0.0
    # structure coordinate x = a_K is the centre of the covariance domain
    assert eigenfunction(field, 2, 3.0) == 0.0


def test_eigenfunction_errors(field):
    with pytest.raises(IndexError):
        eigenfunction(field, 0, 1.0)
    with pytest.raises(IndexError):
        eigenfunction(field, 11, 1.0)
    with pytest.raises(DomainError):
        eigenfunction(field, 1, -0.1)
    with pytest.raises(DomainError):
        eigenfunction(field, 1, 6.01)


def test_orthonormal_by_trapezoid(field):
    xi = np.linspace(-A, A, 10**4)
    F = np.array([eigenfunction_centered(field, i, xi) for i in range(1, field.M + 1)])
    gram = np.array([[trapezoid(F[i] * F[j], xi) for j in range(field.M)] for i in range(field.M)])
    np.testing.assert_allclose(gram, np.eye(field.M), atol=1e-6)


def test_eigenfunctions_solve_the_integral_equation(field):
    # int exp(-c|x-y|) f_i(y) dy = (kappa_i / sigma^2) f_i(x)
    y = np.linspace(-A, A, 20001)
    for i in (1, 2, 5):
        f = eigenfunction_centered(field, i, y)
        for x in (-2.0, 0.4, 2.9):
            lhs = trapezoid(np.exp(-C * np.abs(x - y)) * f, y)
            rhs = field.kappas[i - 1] / 0.04 * eigenfunction_centered(field, i, x)
            assert lhs == pytest.approx(rhs, rel=1e-5, abs=1e-7)


def test_field_value_trivial_cases(field):
    assert field_value(field, 1.3, np.zeros(10)) == 2e11
    eps = np.zeros(10)
    eps[0] = 1.0
    expected = 2e11 + 2e11 * math.sqrt(field.kappas[0]) * eigenfunction(field, 1, 1.3)
    assert field_value(field, 1.3, eps) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(ShapeError):
        field_value(field, 1.3, np.zeros(9))


def test_absolute_field_uses_unit_scale():
    f = make_kl_field(relative=False)
    eps = np.zeros(10)
    eps[0] = 1.0
    assert field_value(f, 1.0, eps) - f.E0 == pytest.approx(math.sqrt(f.kappas[0]) * eigenfunction(f, 1, 1.0),
                                                            rel=1e-4)


def test_variance_matches_mc(field):
    eps = np.random.default_rng(0).standard_normal((10**5, 10))
    for x in (0.0, 1.5, 3.0):
        mc = np.var(field_value(field, np.array([x]), eps)[:, 0])
        assert mc == pytest.approx(pointwise_variance(field, x), rel=0.02)


def test_variance_near_relative_sd(field):
    # ten terms capture most of the 20% coefficient of variation on [0, 3]
    cv = np.sqrt(pointwise_variance(field, np.linspace(0, 3, 7))) / field.E0
    assert np.all((cv > 0.15) & (cv < 0.2))


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=10, max_size=10), st.integers(-4, 4),
       st.floats(0, 6))
def test_field_affine_in_eps(field, eps, power, x):
    eps = np.array(eps)
    a = 2.0 ** power
    np.testing.assert_array_equal(field_fluctuation(field, x, a * eps), a * field_fluctuation(field, x, eps))
    lhs = field_value(field, x, a * eps) - field.E0
    rhs = a * (field_value(field, x, eps) - field.E0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5), st.floats(0.05, 3), st.integers(1, 12))
def test_eigenpairs_general_parameters(a, c, M):
    omegas, kappas = kl_eigenpairs(a, c, 0.3, M)
    assert np.all(np.diff(omegas) > 0) and np.all(np.diff(kappas) < 0)
    for i, w in enumerate(omegas, start=1):
        g = w * math.sin(a * w) - c * math.cos(a * w) if i % 2 else w * math.cos(a * w) + c * math.sin(a * w)
        assert abs(g) < 1e-10 * (1 + w)
