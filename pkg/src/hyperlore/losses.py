"""Losses for the factorization problem with ambient gradients and Hessian-vector products.

All derivatives treat ``U`` and every column ``zbar_i = [z0_i; z_i]`` as free
ambient variables; ``zhat_i = [z0_i; U z_i]``. Directions and gradients use
the :class:`~hyperlore.product.ProductTangent` layout.
"""

import enum

import numpy as np

from .errors import ConstraintViolationError, DimensionError
from .product import ProductTangent

# Below this hyperbolic distance the arccosh-derived factors switch to series.
_SERIES_T = 1e-2


class LossKind(enum.Enum):
    SPATIAL_EUCLIDEAN = "svd"
    FULL_EUCLIDEAN = "euclid-full"
    HYPERBOLIC_DISTANCE = "hyperbolic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "svd": cls.SPATIAL_EUCLIDEAN,
            "method-1": cls.SPATIAL_EUCLIDEAN,
            "spatial": cls.SPATIAL_EUCLIDEAN,
            "euclid-full": cls.FULL_EUCLIDEAN,
            "method-2": cls.FULL_EUCLIDEAN,
            "hyperbolic": cls.HYPERBOLIC_DISTANCE,
            "method-3": cls.HYPERBOLIC_DISTANCE,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown loss kind {value!r}") from None


def _check(y, xbar):
    xbar = np.asarray(xbar, dtype=np.float64)
    if xbar.ndim != 2 or xbar.shape != (y.n + 1, y.m):
        raise DimensionError(f"embeddings of shape {xbar.shape} do not match n={y.n}, m={y.m}")
    return xbar


def _distance_arg(y, xbar):
    # c_i = -<xbar_i, zhat_i>_L = x0_i z0_i - x_i^T U z_i
    return xbar[0] * y.z0 - np.einsum("ij,ij->j", y.U.T @ xbar[1:], y.Z)


def sq_arccosh_factors(c):
    """First and second derivatives of ``arccosh(c)**2`` for ``c >= 1``.

    Returns ``(a, b)`` with ``a = 2 arccosh(c) / sqrt(c^2 - 1)`` and ``b = da/dc``.
    Both have finite limits ``2`` and ``-2/3`` at ``c = 1``; near that point a
    series in ``t = arccosh(c)`` replaces the cancelling closed forms.
    """
    c = np.asarray(c, dtype=np.float64)
    t = np.atleast_1d(np.arccosh(np.maximum(c, 1.0)))
    near = t < _SERIES_T
    ts = np.where(near, 1.0, t)
    # sinh overflows beyond t ~ 710, where both factors correctly tend to 0
    with np.errstate(over="ignore"):
        sh = np.sinh(ts)
        a = 2.0 * ts / sh
        b = 2.0 * (1.0 - ts / np.tanh(ts)) / (sh * sh)
    if np.any(near):
        t2 = t[near] ** 2
        a[near] = 2.0 - t2 / 3.0 + 7.0 * t2**2 / 180.0 - 31.0 * t2**3 / 7560.0
        b[near] = -2.0 / 3.0 + 4.0 * t2 / 15.0 - 4.0 * t2**2 / 63.0 + 8.0 * t2**3 / 675.0
    return a.reshape(c.shape), b.reshape(c.shape)


def loss_value(kind, y, xbar):
    """Objective value at ``y``.

    * spatial Euclidean: ``||X - U Z||_F^2``
    * full Euclidean: ``||Xbar - Zhat||_F^2``
    * hyperbolic distance: ``sum_i arccosh(-<xbar_i, zhat_i>_L)^2``
    """
    kind = LossKind.parse(kind)
    xbar = _check(y, xbar)
    if kind is LossKind.HYPERBOLIC_DISTANCE:
        if np.any(xbar[0] <= 0):
            raise ConstraintViolationError("hyperbolic loss needs upper-sheet columns")
        d = np.arccosh(np.maximum(_distance_arg(y, xbar), 1.0))
        return float(np.sum(d * d))
    spatial = float(np.sum((xbar[1:] - y.U @ y.Z) ** 2))
    if kind is LossKind.SPATIAL_EUCLIDEAN:
        return spatial
    return spatial + float(np.sum((xbar[0] - y.z0) ** 2))


class PointCache:
    """Quantities that depend only on the base point, shared by the gradient and Hessian.

    Holds ``U^T X`` and, for the hyperbolic loss, the factors of
    :func:`sq_arccosh_factors`; for the Euclidean losses ``U^T U`` and ``Z Z^T``.
    """

    def __init__(self, kind, y, xbar):
        self.kind = LossKind.parse(kind)
        self.xbar = _check(y, xbar)
        self.utx = y.U.T @ self.xbar[1:]
        if self.kind is LossKind.HYPERBOLIC_DISTANCE:
            c = self.xbar[0] * y.z0 - np.einsum("ij,ij->j", self.utx, y.Z)
            self.a, self.b = sq_arccosh_factors(c)
            self.neg_a = -self.a
        else:
            self.utu = y.U.T @ y.U
            self.zzt = y.Z @ y.Z.T


def euclidean_gradient(kind, y, xbar, cache=None):
    """Partial derivatives of :func:`loss_value` with respect to ``U`` and ``Zbar``.

    Every term touching the ``n x m`` data is a single product with ``X``, so
    no ``n x m`` temporaries are formed.
    """
    cache = cache or PointCache(kind, y, xbar)
    xbar = cache.xbar
    x = xbar[1:]
    u, z = y.U, y.Z
    utx = cache.utx
    gz = np.empty_like(y.Zbar)
    if cache.kind is LossKind.HYPERBOLIC_DISTANCE:
        a = cache.a
        gu = x @ (z * a).T
        np.negative(gu, out=gu)
        np.multiply(a, xbar[0], out=gz[0])
        np.multiply(utx, -a, out=gz[1:])
        return ProductTangent(gu, gz)
    # resid = X - U Z, expanded
    gu = -2.0 * (x @ z.T - u @ cache.zzt)
    gz[1:] = -2.0 * (utx - cache.utu @ z)
    if cache.kind is LossKind.FULL_EUCLIDEAN:
        gz[0] = -2.0 * (xbar[0] - y.z0)
    else:
        gz[0] = 0.0
    return ProductTangent(gu, gz)


def euclidean_hessian_vec(kind, y, xbar, xi, cache=None):
    """Directional derivative of :func:`euclidean_gradient` along the ambient direction ``xi``."""
    cache = cache or PointCache(kind, y, xbar)
    xbar = cache.xbar
    x = xbar[1:]
    u, z = y.U, y.Z
    du, dz0, dz = xi.U, xi.Zbar[0], xi.Zbar[1:]
    utx = cache.utx
    dutx = du.T @ x
    hz = np.empty_like(y.Zbar)
    if cache.kind is LossKind.HYPERBOLIC_DISTANCE:
        dc = xbar[0] * dz0 - np.einsum("ij,ij->j", dutx, z) - np.einsum("ij,ij->j", utx, dz)
        nda = cache.b * dc
        np.negative(nda, out=nda)
        na = cache.neg_a
        # Row layout (r x m) keeps the elementwise work contiguous; signs live in nda, na.
        np.multiply(nda, -xbar[0], out=hz[0])
        sp = hz[1:]
        np.multiply(utx, nda, out=sp)
        dutx *= na
        sp += dutx
        w = z * nda
        np.multiply(dz, na, out=dutx)
        w += dutx
        return ProductTangent(x @ w.T, hz)
    utu = cache.utu
    dutu = du.T @ u
    # d/dxi of -2 (X Z^T - U Z Z^T) and -2 (U^T X - U^T U Z)
    hu = -2.0 * (x @ dz.T - du @ cache.zzt - u @ (dz @ z.T + z @ dz.T))
    hz[1:] = -2.0 * (dutx - (dutu + dutu.T) @ z - utu @ dz)
    hz[0] = 2.0 * dz0 if cache.kind is LossKind.FULL_EUCLIDEAN else 0.0
    return ProductTangent(hu, hz)
