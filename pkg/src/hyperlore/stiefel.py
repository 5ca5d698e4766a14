"""Stiefel manifold St(r, n) of n x r matrices with orthonormal columns."""

import numpy as np

from .errors import ConstraintViolationError, DimensionError, SingularityError, TangencyError

STIEFEL_TOL = 1e-9


def symm(a):
    return 0.5 * (a + a.T)


def validate_stiefel(u, tol=STIEFEL_TOL):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] > u.shape[0]:
        raise DimensionError(f"expected an n x r matrix with r <= n, got shape {u.shape}")
    resid = np.linalg.norm(u.T @ u - np.eye(u.shape[1]))
    if not resid < tol:
        raise ConstraintViolationError(f"columns are not orthonormal (residual {resid:.3e})")
    return u


def validate_stiefel_tangent(u, xi, tol=STIEFEL_TOL):
    xi = np.asarray(xi, dtype=np.float64)
    resid = np.linalg.norm(symm(u.T @ xi))
    if not resid < tol * max(1.0, np.linalg.norm(xi)):
        raise TangencyError(f"symm(U^T xi) does not vanish (residual {resid:.3e})")
    return xi


def project_to_stiefel_tangent(u, zeta):
    """Orthogonal projection ``zeta - U symm(U^T zeta)`` onto the tangent space at ``U``."""
    u = np.asarray(u, dtype=np.float64)
    zeta = np.asarray(zeta, dtype=np.float64)
    if u.shape != zeta.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {zeta.shape}")
    return zeta - u @ symm(u.T @ zeta)


def orthogonal_factor(a):
    """Polar factor ``A (A^T A)^{-1/2}`` of a full-column-rank matrix.

    Computed from the thin SVD ``A = W S V^T`` as ``W V^T``, which never forms
    ``A^T A``. The polar factor is unique for full-rank ``A``, so no sign
    convention on the SVD is needed for the result to be deterministic.

    Raises
    ------
    SingularityError
        If ``A`` is numerically rank deficient.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise SingularityError("matrix has non-finite entries")
    w, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size and s[-1] <= s[0] * a.shape[0] * np.finfo(float).eps:
        raise SingularityError(f"matrix is rank deficient (smallest singular value {s[-1]:.3e})")
    return w @ vt


def stiefel_retract(u, xi):
    """Polar retraction ``uf(U + xi)``."""
    u = np.asarray(u, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if u.shape != xi.shape:
        raise DimensionError(f"shape mismatch: {u.shape} vs {xi.shape}")
    if not np.any(xi):
        return u.copy()
    return orthogonal_factor(u + xi)


def random_stiefel(n, r, seed):
    """Orthonormal factor of an ``n x r`` standard normal matrix drawn with ``seed``."""
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got r={r}, n={n}")
    rng = np.random.default_rng(seed)
    q, rr = np.linalg.qr(rng.standard_normal((n, r)))
    # Fix signs so the triangular factor has a nonnegative diagonal.
    signs = np.where(np.diag(rr) < 0, -1.0, 1.0)
    return q * signs
