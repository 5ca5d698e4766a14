"""Shared builders and independent oracles for the test suite."""

import math

import numpy as np

from hyperlore import hyperbolic as hb
from hyperlore.product import ProductPoint
from hyperlore.stiefel import random_stiefel

#: PASS/FAIL lines collected by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def random_ball(n, m, rng, max_norm=0.95):
    """``m`` Poincare points in dimension ``n`` with norms spread over ``[0, max_norm)``."""
    w = rng.standard_normal((n, m))
    w /= np.linalg.norm(w, axis=0)
    return w * (max_norm * rng.uniform(0.0, 1.0, size=m))


def random_hyperboloid(n, m, rng, scale=1.0):
    return hb.lift_to_hyperboloid(scale * rng.standard_normal((n, m)))


def random_point(n, m, r, rng, scale=1.0):
    u = random_stiefel(n, r, int(rng.integers(2**31)))
    return ProductPoint(u, hb.lift_to_hyperboloid(scale * rng.standard_normal((r, m))))


def planted(n, m, r, rng, scale=1.0):
    """Data ``Xbar`` that is exactly ``expand`` of a rank-``r`` point, with that point."""
    y = random_point(n, m, r, rng, scale)
    return np.vstack([y.z0[None, :], y.U @ y.Z]), y


def brute_force_ap(dist, neighbors, self_index):
    """AP by counting: the k-th closest neighbor sits at position k plus the number
    of non-neighbors no farther away than it (ties count against the neighbor)."""
    others = [w for w in range(len(dist)) if w != self_index]
    nbrs = sorted(neighbors, key=lambda v: dist[v])
    non = [w for w in others if w not in neighbors]
    positions = []
    for k, v in enumerate(nbrs, start=1):
        ahead = sum(1 for w in non if dist[w] <= dist[v])
        positions.append(k + ahead)
    precisions = [k / p for k, p in enumerate(positions, start=1)]
    return math.fsum(precisions) / len(precisions), positions


def brute_force_map(xbar, adjacency):
    aps = []
    for i, nbrs in enumerate(adjacency):
        if not nbrs:
            continue
        dist = [hb.hyperboloid_distance(xbar[:, i], xbar[:, j]) for j in range(xbar.shape[1])]
        aps.append(brute_force_ap(dist, nbrs, i)[0])
    return math.fsum(aps) / len(aps)


def random_connected_graph(k, rng, extra_prob=0.3):
    """Random spanning tree on ``k`` nodes plus each remaining pair with ``extra_prob``."""
    order = rng.permutation(k)
    edges = set()
    for idx in range(1, k):
        parent = order[rng.integers(idx)]
        edges.add(tuple(sorted((int(order[idx]), int(parent)))))
    for a in range(k):
        for b in range(a + 1, k):
            if rng.random() < extra_prob:
                edges.add((a, b))
    return edges
