import mpmath
import numpy as np
import pytest

from hyperlore import hyperbolic as hb
from hyperlore.errors import ConstraintViolationError, DimensionError
from hyperlore.losses import (
    LossKind,
    euclidean_gradient,
    euclidean_hessian_vec,
    loss_value,
    sq_arccosh_factors,
)
from hyperlore.product import ProductPoint, ProductTangent
from hyperlore.solver import riemannian_gradient

from helpers import planted, random_hyperboloid, random_point

KINDS = list(LossKind)


def _shift(y, d, h):
    return ProductPoint(y.U + h * d.U, y.Zbar + h * d.Zbar)


def _dot(a, b):
    return float(np.sum(a.U * b.U) + np.sum(a.Zbar * b.Zbar))


def _direction(y, rng):
    return ProductTangent(rng.standard_normal(y.U.shape), rng.standard_normal(y.Zbar.shape))


@pytest.fixture
def problem():
    rng = np.random.default_rng(0)
    return random_hyperboloid(20, 15, rng), random_point(20, 15, 3, rng), rng


def test_parse_aliases():
    assert LossKind.parse("method-1") is LossKind.SPATIAL_EUCLIDEAN
    assert LossKind.parse("euclid-full") is LossKind.FULL_EUCLIDEAN
    assert LossKind.parse("Method-3") is LossKind.HYPERBOLIC_DISTANCE
    with pytest.raises(ValueError):
        LossKind.parse("poincare")


@pytest.mark.parametrize("kind", KINDS)
def test_zero_on_exact_factorization(kind):
    xbar, y = planted(10, 12, 3, np.random.default_rng(1))
    # arccosh(1 + rounding) squared is of order eps for the distance loss
    assert loss_value(kind, y, xbar) == pytest.approx(0.0, abs=1e-12)
    g = riemannian_gradient(kind, y, xbar)
    assert np.max(np.abs(g.U)) < 1e-12
    assert np.max(np.abs(g.Zbar)) < 1e-12


@pytest.mark.parametrize("kind", [LossKind.SPATIAL_EUCLIDEAN, LossKind.FULL_EUCLIDEAN])
def test_euclidean_ambient_gradient_zero_on_exact_factorization(kind):
    xbar, y = planted(10, 12, 3, np.random.default_rng(1))
    g = euclidean_gradient(kind, y, xbar)
    assert np.max(np.abs(g.U)) < 1e-12
    assert np.max(np.abs(g.Zbar)) < 1e-12


def test_distance_ambient_gradient_is_normal_on_exact_factorization():
    # d/dc arccosh(c)^2 -> 2 at c = 1, so the ambient gradient is 2 [x0; -U^T x],
    # which is Lorentz-parallel to zbar, and -2 U Z Z^T on U, which is normal to St(r, n).
    xbar, y = planted(10, 12, 3, np.random.default_rng(1))
    g = euclidean_gradient("hyperbolic", y, xbar)
    np.testing.assert_allclose(g.Zbar[0], 2 * y.z0, rtol=1e-12)
    np.testing.assert_allclose(g.Zbar[1:], -2 * y.Z, atol=1e-12)
    np.testing.assert_allclose(g.U, -2 * y.U @ (y.Z @ y.Z.T), atol=1e-11)


def test_first_row_split(problem):
    xbar, y, _ = problem
    m1 = loss_value(LossKind.SPATIAL_EUCLIDEAN, y, xbar)
    m2 = loss_value(LossKind.FULL_EUCLIDEAN, y, xbar)
    assert m2 == pytest.approx(m1 + np.sum((xbar[0] - y.z0) ** 2), rel=1e-12)


def test_hyperbolic_loss_example():
    xbar = np.array([[np.sqrt(2.0)], [1.0], [0.0]])
    y = ProductPoint(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]]))
    val = loss_value(LossKind.HYPERBOLIC_DISTANCE, y, xbar)
    assert val == pytest.approx(np.arccosh(np.sqrt(2.0)) ** 2, rel=1e-14)
    assert val == pytest.approx(0.776819, abs=1e-6)


def test_hyperbolic_loss_matches_distances(problem):
    xbar, y, _ = problem
    zhat = np.vstack([y.z0[None, :], y.U @ y.Z])
    d = hb.hyperboloid_distance(xbar, zhat)
    assert loss_value("hyperbolic", y, xbar) == pytest.approx(np.sum(d**2), rel=1e-10)


def test_loss_errors(problem):
    xbar, y, _ = problem
    with pytest.raises(DimensionError):
        loss_value("svd", y, xbar[:, :5])
    lower = xbar.copy()
    lower[0, 2] = -lower[0, 2]
    with pytest.raises(ConstraintViolationError):
        loss_value("hyperbolic", y, lower)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_central_differences(kind, problem):
    xbar, y, rng = problem
    g = euclidean_gradient(kind, y, xbar)
    h = 1e-6
    for _ in range(20):
        d = _direction(y, rng)
        fd = (loss_value(kind, _shift(y, d, h), xbar) - loss_value(kind, _shift(y, d, -h), xbar))
        fd /= 2 * h
        assert abs(fd - _dot(g, d)) <= 1e-6 * abs(fd)


def test_spatial_gradient_closed_form(problem):
    xbar, y, _ = problem
    g = euclidean_gradient("svd", y, xbar)
    resid = xbar[1:] - y.U @ y.Z
    np.testing.assert_allclose(g.U, -2 * resid @ y.Z.T, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(g.Zbar[1:], -2 * y.U.T @ resid, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(g.Zbar[0], 0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_hessian_vec_central_differences(kind, problem):
    xbar, y, rng = problem
    h = 1e-5
    for _ in range(10):
        xi = _direction(y, rng)
        hv = euclidean_hessian_vec(kind, y, xbar, xi)
        gp = euclidean_gradient(kind, _shift(y, xi, h), xbar)
        gm = euclidean_gradient(kind, _shift(y, xi, -h), xbar)
        fd_u = (gp.U - gm.U) / (2 * h)
        fd_z = (gp.Zbar - gm.Zbar) / (2 * h)
        err = np.sqrt(np.sum((fd_u - hv.U) ** 2) + np.sum((fd_z - hv.Zbar) ** 2))
        assert err < 1e-5 * np.sqrt(_dot(hv, hv))


@pytest.mark.parametrize("kind", KINDS)
def test_hessian_vec_linear_and_symmetric(kind, problem):
    xbar, y, rng = problem
    zero = euclidean_hessian_vec(kind, y, xbar, ProductTangent.zeros_like(y))
    assert not np.any(zero.U) and not np.any(zero.Zbar)
    for _ in range(10):
        a, b = _direction(y, rng), _direction(y, rng)
        ha = euclidean_hessian_vec(kind, y, xbar, a)
        hb_ = euclidean_hessian_vec(kind, y, xbar, b)
        assert _dot(ha, b) == pytest.approx(_dot(hb_, a), rel=1e-10)
        hab = euclidean_hessian_vec(kind, y, xbar, a + 2.0 * b)
        np.testing.assert_allclose(hab.U, ha.U + 2 * hb_.U, rtol=1e-10, atol=1e-10)


def _mp_factors(t):
    t = mpmath.mpf(t)
    sh = mpmath.sinh(t)
    a = 2 * t / sh
    b = 2 * (sh - t * mpmath.cosh(t)) / sh**3
    return float(a), float(b)


def test_sq_arccosh_factors_against_high_precision():
    mpmath.mp.dps = 50
    ts = np.concatenate([[0.0], np.logspace(-9, 1, 60), [9.999e-3, 1e-2, 1.0001e-2]])
    c = np.cosh(ts)
    a, b = sq_arccosh_factors(c)
    t_eff = np.arccosh(c)
    for k, t in enumerate(t_eff):
        if t == 0:
            assert (a[k], b[k]) == (2.0, pytest.approx(-2 / 3, rel=1e-15))
            continue
        wa, wb = _mp_factors(t)
        assert a[k] == pytest.approx(wa, rel=1e-13)
        assert b[k] == pytest.approx(wb, rel=1e-9)


def test_sq_arccosh_factors_are_derivatives():
    # a = d/dc arccosh(c)^2 and b = da/dc, checked by high-precision differences.
    mpmath.mp.dps = 50
    for c in (1.0 + 1e-6, 1.2, 3.0, 40.0):
        a, b = sq_arccosh_factors(np.array([c]))
        f = lambda x: mpmath.acosh(x) ** 2  # noqa: E731
        assert a[0] == pytest.approx(float(mpmath.diff(f, c)), rel=1e-9)
        assert b[0] == pytest.approx(float(mpmath.diff(f, c, 2)), rel=1e-6)


def test_hyperbolic_gradient_continuous_near_coincidence():
    rng = np.random.default_rng(3)
    xbar, y = planted(6, 8, 2, rng)
    base = euclidean_gradient("hyperbolic", y, xbar)
    for eps in (1e-14, 1e-10, 1e-6):
        near = ProductPoint(y.U, hb.lift_to_hyperboloid(y.Z + eps))
        g = euclidean_gradient("hyperbolic", near, xbar)
        assert np.all(np.isfinite(g.U)) and np.all(np.isfinite(g.Zbar))
        scale = np.abs(xbar).max()
        assert np.max(np.abs(g.Zbar - base.Zbar)) < 1e3 * max(eps, 1e-13) * scale
        assert np.max(np.abs(riemannian_gradient("hyperbolic", near, xbar).Zbar)) \
            < 1e3 * max(eps, 1e-13) * scale


def test_sq_arccosh_factors_far_apart():
    # sinh^3 alone would overflow past t ~ 237
    mpmath.mp.dps = 50
    with np.errstate(all="raise"):
        a, b = sq_arccosh_factors(np.cosh(np.array([300.0, 700.0])))
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    assert np.all(b <= 0) and np.all(a > 0)
    wa, wb = _mp_factors(50.0)
    a, b = sq_arccosh_factors(np.array([np.cosh(50.0)]))
    assert a[0] == pytest.approx(wa, rel=1e-13) and b[0] == pytest.approx(wb, rel=1e-9)
