"""Closed-form rank-r factorization of the spatial block (Method-1)."""

import numpy as np

from . import hyperbolic as hb
from .errors import DimensionError
from .product import FactoredEmbedding


def _spatial_block(xbar):
    xbar = hb.validate_hyperboloid(np.asarray(xbar, dtype=np.float64))
    if xbar.ndim != 2:
        raise DimensionError("embeddings must be an (n+1) x m matrix")
    return xbar[1:]


def _fix_signs(u):
    # Largest-magnitude entry of every column made positive; first index wins ties.
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def top_left_singular_vectors(x, r):
    """Leading ``r`` left singular vectors of ``x`` with a deterministic sign convention."""
    w, _, _ = np.linalg.svd(x, full_matrices=False)
    return _fix_signs(w[:, :r])


def solve_svd(xbar, r, labels=None):
    """Best rank-``r`` factorization ``X ~ U Z`` of the spatial block, lifted back to ``H^n``.

    ``U`` holds the top ``r`` left singular vectors of ``X`` and ``Z = U^T X``;
    by Eckart-Young this minimizes ``||X - U Z||_F^2``. The first row of
    ``xbar`` plays no role: ``z0`` follows from the hyperboloid constraint.

    Parameters
    ----------
    xbar : ndarray, shape (n + 1, m)
        Hyperboloid embeddings, one per column.
    r : int
        Target rank, ``1 <= r <= min(n, m)``.
    labels : sequence of str, optional
        Carried through to the returned factorization.

    Returns
    -------
    FactoredEmbedding
    """
    x = _spatial_block(xbar)
    n, m = x.shape
    if not 1 <= r <= min(n, m):
        raise DimensionError(f"rank must satisfy 1 <= r <= min(n, m) = {min(n, m)}, got {r}")
    u = top_left_singular_vectors(x, r)
    z = u.T @ x
    z0 = np.sqrt(1.0 + np.sum(z * z, axis=0))
    return FactoredEmbedding(u, z, z0, None if labels is None else tuple(labels))


def best_rank_r_error(xbar, r):
    """Squared singular-value tail ``sum_{k > r} sigma_k(X)^2``."""
    x = _spatial_block(xbar)
    if not 0 <= r <= x.shape[0]:
        raise DimensionError(f"rank must satisfy 0 <= r <= n = {x.shape[0]}, got {r}")
    s = np.linalg.svd(x, compute_uv=False)
    return float(np.sum(s[r:] ** 2))


def spatial_error(f, xbar):
    """``||X - U Z||_F^2`` of a factorization against the spatial block of ``xbar``."""
    x = np.asarray(xbar, dtype=np.float64)[1:]
    return float(np.sum((x - f.U @ f.Z) ** 2))


def first_row_gap(f, xbar):
    """Per-column ``|z0_i - x0_i|``: how well the discarded first row is recovered."""
    return np.abs(f.z0 - np.asarray(xbar, dtype=np.float64)[0])
