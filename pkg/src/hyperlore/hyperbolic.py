"""Hyperboloid and Poincare ball models of hyperbolic space (curvature -1).

Points of the hyperboloid model are arrays whose first axis holds the
coordinates ``[x0, x1, ..., xn]``. Every function accepts a single point of
shape ``(n + 1,)`` and, where it makes sense, a batch of points stored as the
columns of an ``(n + 1, m)`` array. Poincare points are arrays of shape
``(n,)`` (or ``(n, m)`` for batches).
"""

import numpy as np

from .errors import ConstraintViolationError, DimensionError, NumericError, TangencyError

#: Absolute tolerance for the hyperboloid constraint at unit scale.
HYPERBOLOID_TOL = 1e-9
#: Poincare points with Euclidean norm at or above ``1 - POINCARE_MARGIN`` are rejected.
POINCARE_MARGIN = 1e-12
#: Below this Lorentz norm the retraction returns its base point unchanged.
RETRACT_SMALL = 1e-14


def _as_float(a):
    return np.asarray(a, dtype=np.float64)


def lorentz_inner(a, b):
    """Lorentz scalar product ``-a0*b0 + sum_k a_k*b_k`` along the first axis.

    Parameters
    ----------
    a, b : array_like
        Vectors of shape ``(n + 1,)`` or column batches of shape ``(n + 1, m)``.

    Returns
    -------
    float or ndarray
        A scalar for vectors, a length-``m`` array for column batches.
    """
    a = _as_float(a)
    b = _as_float(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 0 or a.shape[0] < 2:
        raise DimensionError("Lorentz vectors need at least two coordinates")
    if a.ndim == 1:
        return float(np.dot(a[1:], b[1:]) - a[0] * b[0])
    return np.einsum("ij,ij->j", a[1:], b[1:]) - a[0] * b[0]


def hyperboloid_residual(x):
    """Scale-aware constraint residual ``|<x, x>_L + 1| / max(1, x0**2)``.

    Large hyperboloid coordinates carry an absolute rounding error of order
    ``eps * x0**2`` in the Lorentz self-product, so the residual is measured
    relative to that scale.
    """
    x = _as_float(x)
    res = np.abs(lorentz_inner(x, x) + 1.0) / np.maximum(1.0, x[0] ** 2)
    return float(res) if x.ndim == 1 else res


def validate_hyperboloid(x, tol=HYPERBOLOID_TOL):
    """Raise :class:`ConstraintViolationError` unless every column lies on the upper sheet.

    Returns the input as a float array so callers can chain.
    """
    x = _as_float(x)
    if x.ndim not in (1, 2) or x.shape[0] < 2:
        raise DimensionError(f"expected (n+1,) or (n+1, m) array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("hyperboloid point has non-finite coordinates")
    bad = (x[0] <= 0) | (np.atleast_1d(hyperboloid_residual(x)) > tol)
    bad = np.atleast_1d(bad)
    if np.any(bad):
        cols = np.flatnonzero(bad).tolist()
        if x.ndim == 1:
            raise ConstraintViolationError("point is not on the upper hyperboloid sheet")
        raise ConstraintViolationError(f"columns not on the upper hyperboloid sheet: {cols}")
    return x


def validate_poincare(w, margin=POINCARE_MARGIN):
    """Raise unless every point has Euclidean norm below ``1 - margin``."""
    w = _as_float(w)
    if not np.all(np.isfinite(w)):
        raise NumericError("Poincare point has non-finite coordinates")
    norms = np.atleast_1d(np.linalg.norm(w, axis=0))
    bad = norms >= 1.0 - margin
    if np.any(bad):
        if w.ndim == 1:
            raise ConstraintViolationError(f"Poincare point has norm {norms[0]!r} >= 1 - {margin}")
        raise ConstraintViolationError(
            f"Poincare columns outside the open unit ball: {np.flatnonzero(bad).tolist()}"
        )
    return w


def _clamped_arccosh(c):
    return np.arccosh(np.maximum(c, 1.0))


def chord_distance(u, v):
    """``arccosh(-<u, v>_L)`` evaluated as ``2 asinh(|u - v|_L / 2)``, without validation.

    The two agree on the hyperboloid, where ``<u - v, u - v>_L = 2 (-<u, v>_L - 1)``.
    The chord form is exactly zero for identical points and keeps full relative
    accuracy for nearby ones, where ``arccosh`` near 1 loses half the digits.
    ``v`` may be a column batch when ``u`` is a single point.
    """
    w = v - u if v.ndim == u.ndim else v - u[:, None]
    sq = np.einsum("i...,i...->...", w[1:], w[1:]) - w[0] * w[0]
    return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(sq, 0.0)))


def hyperboloid_distance(u, v):
    """Geodesic distance ``arccosh(-<u, v>_L)``.

    Evaluated in the chord form of :func:`chord_distance`, which clamps the
    same way as ``arccosh(max(-<u, v>_L, 1))`` and gives exactly zero for
    identical points.
    """
    u = validate_hyperboloid(u)
    v = validate_hyperboloid(v)
    if u.shape != v.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {v.shape}")
    d = chord_distance(u, v)
    return float(d) if u.ndim == 1 else d


def poincare_distance(u, v):
    """Geodesic distance between two points of the Poincare ball."""
    u = validate_poincare(u)
    v = validate_poincare(v)
    if u.shape != v.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {v.shape}")
    uu = np.sum(u * u, axis=0)
    vv = np.sum(v * v, axis=0)
    diff = np.sum((u - v) ** 2, axis=0)
    d = _clamped_arccosh(1.0 + 2.0 * diff / ((1.0 - uu) * (1.0 - vv)))
    return float(d) if u.ndim == 1 else d


def poincare_norm(u):
    """Distance from the origin of the ball, ``2 * arctanh(|u|)``."""
    u = validate_poincare(u)
    d = 2.0 * np.arctanh(np.linalg.norm(u, axis=0))
    return float(d) if u.ndim == 1 else d


def hyperboloid_to_poincare(x):
    """Map ``[x0; x]`` on the hyperboloid to ``x / (x0 + 1)`` in the ball."""
    x = validate_hyperboloid(x)
    return x[1:] / (x[0] + 1.0)


def poincare_to_hyperboloid(w):
    """Inverse of :func:`hyperboloid_to_poincare`."""
    w = validate_poincare(w)
    ww = np.sum(w * w, axis=0)
    scale = 1.0 / (1.0 - ww)
    x0 = np.reshape(scale * (1.0 + ww), (1,) + w.shape[1:])
    return np.concatenate([x0, 2.0 * scale * w], axis=0)


def lift_to_hyperboloid(x):
    """Prepend ``sqrt(1 + |x|^2)`` so that ``x`` becomes the spatial part of a hyperboloid point."""
    x = _as_float(x)
    if not np.all(np.isfinite(x)):
        raise NumericError("cannot lift non-finite coordinates")
    x0 = np.sqrt(1.0 + np.sum(x * x, axis=0))
    return np.concatenate([np.reshape(x0, (1,) + x.shape[1:]), x], axis=0)


def project_to_hyperbolic_tangent(z, zeta):
    """Lorentz-orthogonal projection of an ambient vector onto the tangent space at ``z``.

    Computes ``zeta + z * <z, zeta>_L``; works column-wise for batches.
    """
    z = _as_float(z)
    zeta = _as_float(zeta)
    if z.shape != zeta.shape:
        raise DimensionError(f"shape mismatch: {z.shape} vs {zeta.shape}")
    return zeta + z * lorentz_inner(z, zeta)


def validate_hyperbolic_tangent(z, xi, tol=HYPERBOLOID_TOL):
    """Raise :class:`TangencyError` unless ``<z, xi>_L`` vanishes (relative to scale)."""
    z = _as_float(z)
    xi = _as_float(xi)
    scale = np.maximum(1.0, np.abs(z[0]) * np.sqrt(np.sum(xi * xi, axis=0)))
    if np.any(np.abs(lorentz_inner(z, xi)) > tol * scale):
        raise TangencyError("direction is not Lorentz-orthogonal to its base point")
    return xi


def hyperbolic_retract(z, xi):
    """Exponential map ``z cosh|xi|_L + xi sinh|xi|_L / |xi|_L`` on the hyperboloid.

    The result is re-lifted from its spatial part whenever rounding pushes it
    off the constraint by more than :data:`HYPERBOLOID_TOL`.
    """
    z = _as_float(z)
    xi = _as_float(xi)
    if z.shape != xi.shape:
        raise DimensionError(f"shape mismatch: {z.shape} vs {xi.shape}")
    sq = np.atleast_1d(lorentz_inner(xi, xi))
    scale = np.maximum(1.0, np.sum(xi * xi, axis=0))
    if np.any(sq < -HYPERBOLOID_TOL * np.atleast_1d(scale)):
        raise TangencyError("tangent direction has negative Lorentz norm")
    nrm = np.sqrt(np.maximum(sq, 0.0))
    small = nrm < RETRACT_SMALL
    safe = np.where(small, 1.0, nrm)
    out = z * np.cosh(nrm) + xi * (np.sinh(safe) / safe)
    out = np.where(small, z, out)
    if z.ndim == 1:
        out = out.reshape(z.shape)
    drift = np.atleast_1d(np.abs(lorentz_inner(out, out) + 1.0)) > HYPERBOLOID_TOL
    if np.any(drift):
        relifted = lift_to_hyperboloid(out[1:])
        out = np.where(drift, relifted, out) if z.ndim > 1 else relifted
    return out
