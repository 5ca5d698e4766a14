"""The search space St(r, n) x H^r x ... x H^r used by the trust-region solver.

A point ``y = (U, zbar_1, ..., zbar_m)`` is stored as the Stiefel matrix ``U``
(``n x r``) and the matrix ``Zbar`` (``(r + 1) x m``) whose columns are the
low-dimensional hyperboloid points ``[z0_i; z_i]``. Tangent vectors and
ambient directions use the same layout.
"""

from dataclasses import dataclass, field

import numpy as np

from . import hyperbolic as hb
from . import stiefel as st
from .errors import ConstraintViolationError, DimensionError


@dataclass(frozen=True)
class ProductPoint:
    U: np.ndarray
    Zbar: np.ndarray

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def r(self):
        return self.U.shape[1]

    @property
    def m(self):
        return self.Zbar.shape[1]

    @property
    def z0(self):
        return self.Zbar[0]

    @property
    def Z(self):
        return self.Zbar[1:]

    def validate(self, tol=1e-9):
        if self.Zbar.ndim != 2 or self.Zbar.shape[0] != self.r + 1:
            raise DimensionError(
                f"Zbar must be (r+1) x m = ({self.r + 1}, m), got {self.Zbar.shape}"
            )
        st.validate_stiefel(self.U, tol)
        hb.validate_hyperboloid(self.Zbar, tol)
        return self


@dataclass(frozen=True)
class ProductTangent:
    """Tangent (or ambient) direction with a Stiefel block and an ``(r+1) x m`` block.

    Supports the vector-space operations needed by the inner solver.
    """

    U: np.ndarray
    Zbar: np.ndarray

    def __add__(self, other):
        return ProductTangent(self.U + other.U, self.Zbar + other.Zbar)

    def __sub__(self, other):
        return ProductTangent(self.U - other.U, self.Zbar - other.Zbar)

    def __neg__(self):
        return ProductTangent(-self.U, -self.Zbar)

    def __mul__(self, scalar):
        return ProductTangent(scalar * self.U, scalar * self.Zbar)

    __rmul__ = __mul__

    @classmethod
    def zeros_like(cls, y):
        return cls(np.zeros_like(y.U), np.zeros_like(y.Zbar))


@dataclass(frozen=True)
class FactoredEmbedding:
    """Persistable factorization ``x_i ~ [z0_i; U z_i]``.

    Stores ``n*r + r*m + m`` floats in place of ``(n + 1) * m``.
    """

    U: np.ndarray
    Z: np.ndarray
    z0: np.ndarray
    labels: tuple = field(default=None)

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def r(self):
        return self.U.shape[1]

    @property
    def m(self):
        return self.Z.shape[1]

    @property
    def stored_floats(self):
        return self.U.size + self.Z.size + self.z0.size

    def validate(self, tol=1e-9):
        st.validate_stiefel(self.U, tol)
        if self.Z.shape[0] != self.r or self.z0.shape != (self.Z.shape[1],):
            raise DimensionError(
                f"inconsistent shapes U {self.U.shape}, Z {self.Z.shape}, z0 {self.z0.shape}"
            )
        if self.labels is not None and len(self.labels) != self.m:
            raise DimensionError(f"{len(self.labels)} labels for {self.m} columns")
        expected = np.sqrt(1.0 + np.sum(self.Z**2, axis=0))
        bad = np.abs(self.z0 - expected) > tol * np.maximum(1.0, expected)
        if np.any(bad) or np.any(self.z0 <= 0):
            raise ConstraintViolationError(
                f"z0 does not match sqrt(1 + |z|^2) in columns {np.flatnonzero(bad).tolist()}"
            )
        return self

    def to_point(self):
        return ProductPoint(self.U, np.vstack([self.z0[None, :], self.Z]))

    @classmethod
    def from_point(cls, y, labels=None):
        return cls(y.U.copy(), y.Z.copy(), y.z0.copy(), None if labels is None else tuple(labels))


def product_metric(y, xi, eta):
    """Frobenius product on the Stiefel block plus Lorentz products on each hyperbolic block."""
    if xi.U.shape != y.U.shape or eta.U.shape != y.U.shape:
        raise DimensionError("Stiefel blocks do not match the base point")
    if xi.Zbar.shape != y.Zbar.shape or eta.Zbar.shape != y.Zbar.shape:
        raise DimensionError("hyperbolic blocks do not match the base point")
    # Frobenius on everything, then flip the sign of the first hyperbolic row twice over.
    return float(np.vdot(xi.U, eta.U) + np.vdot(xi.Zbar, eta.Zbar)
                 - 2.0 * np.dot(xi.Zbar[0], eta.Zbar[0]))


def product_norm(y, xi):
    return float(np.sqrt(max(product_metric(y, xi, xi), 0.0)))


def product_project(y, ambient):
    """Project an ambient direction onto the tangent space at ``y`` factor by factor."""
    if ambient.U.shape != y.U.shape or ambient.Zbar.shape != y.Zbar.shape:
        raise DimensionError("ambient direction does not match the base point")
    return ProductTangent(
        st.project_to_stiefel_tangent(y.U, ambient.U),
        hb.project_to_hyperbolic_tangent(y.Zbar, ambient.Zbar),
    )


def product_retract(y, xi):
    """Polar retraction on the Stiefel block and exponential map on each hyperbolic block."""
    return ProductPoint(
        st.stiefel_retract(y.U, xi.U),
        hb.hyperbolic_retract(y.Zbar, xi.Zbar),
    )


def random_tangent(y, rng):
    """Random unit-norm tangent vector at ``y`` (test and probe helper)."""
    amb = ProductTangent(rng.standard_normal(y.U.shape), rng.standard_normal(y.Zbar.shape))
    xi = product_project(y, amb)
    return xi * (1.0 / product_norm(y, xi))


def expand(f):
    """Dense ``(n + 1) x m`` embedding matrix with columns ``[z0_i; U z_i]``."""
    return np.vstack([f.z0[None, :], f.U @ f.Z])


def expand_point(y):
    return np.vstack([y.z0[None, :], y.U @ y.Z])


def manifold_dim(n, m, r):
    return n * r - r * (r + 1) // 2 + m * r


def _top_left_singular_vectors(x, r):
    from .svd import top_left_singular_vectors

    return top_left_singular_vectors(x, r)


def initialize(xbar, r, strategy="svd-warm", seed=0):
    """Starting point on the product manifold for the trust-region solver.

    ``svd-warm`` takes the leading ``r`` left singular vectors of the spatial
    block ``X`` as ``U``; ``random`` draws ``U`` from :func:`stiefel.random_stiefel`.
    In both cases ``z_i = U^T x_i`` lifted onto ``H^r``.
    """
    xbar = hb.validate_hyperboloid(np.asarray(xbar, dtype=np.float64))
    if xbar.ndim != 2:
        raise DimensionError("embeddings must be an (n+1) x m matrix")
    n = xbar.shape[0] - 1
    if not 1 <= r <= n:
        raise DimensionError(f"rank must satisfy 1 <= r <= n = {n}, got {r}")
    x = xbar[1:]
    if strategy == "svd-warm":
        if r > min(x.shape):
            # More components than the data can determine; complete the basis.
            u = _complete_basis(_top_left_singular_vectors(x, min(x.shape)), r, seed)
        else:
            u = _top_left_singular_vectors(x, r)
    elif strategy == "random":
        u = st.random_stiefel(n, r, seed)
    else:
        raise ValueError(f"unknown initialization strategy {strategy!r}")
    zbar = hb.lift_to_hyperboloid(u.T @ x)
    return ProductPoint(u, zbar)


def _complete_basis(u, r, seed):
    n, k = u.shape
    extra = st.random_stiefel(n, r - k, seed)
    extra -= u @ (u.T @ extra)
    q, _ = np.linalg.qr(extra)
    q -= u @ (u.T @ q)
    q, _ = np.linalg.qr(q)
    return np.hstack([u, q])
