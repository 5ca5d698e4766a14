"""Graph reconstruction quality: mean average precision of hyperbolic distance rankings."""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import hyperbolic as hb
from .errors import DimensionError, EmptyInputError, HyperloreError
from .losses import LossKind, loss_value
from .product import expand
from .solver import TrConfig, tr_solve
from .svd import solve_svd


@dataclass(frozen=True)
class ReconstructionGraph:
    """Undirected graph over embedding labels; edges are stored as sorted label pairs."""

    labels: tuple
    edges: frozenset

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise HyperloreError("graph labels must be unique")
        known = set(self.labels)
        for u, v in self.edges:
            if u == v:
                raise HyperloreError(f"self-loop on {u!r}")
            if u not in known or v not in known:
                raise HyperloreError(f"edge ({u!r}, {v!r}) references an unknown label")

    @classmethod
    def from_pairs(cls, labels, pairs):
        return cls(tuple(labels), frozenset(tuple(sorted((u, v))) for u, v in pairs))

    def adjacency(self):
        """Neighbor index sets aligned with ``labels``."""
        index = {lab: i for i, lab in enumerate(self.labels)}
        adj = [set() for _ in self.labels]
        for u, v in self.edges:
            adj[index[u]].add(index[v])
            adj[index[v]].add(index[u])
        return adj


@dataclass(frozen=True)
class MapResult:
    map: float
    per_node_ap: dict
    nodes_evaluated: int
    aggregation: str = "node"
    mean_rank: float = None

    def to_dict(self):
        return {
            "map": self.map,
            "nodes_evaluated": self.nodes_evaluated,
            "aggregation": self.aggregation,
            "mean_rank": self.mean_rank,
            "per_node_ap": self.per_node_ap,
        }


def distances_from(xbar, i):
    """Hyperbolic distances from column ``i`` to every column of ``xbar``."""
    return hb.chord_distance(xbar[:, i], xbar)


def node_average_precision(dist, neighbors, self_index):
    """Average precision of ``neighbors`` when all other nodes are ranked by ``dist``.

    Ties are broken pessimistically: a non-neighbor at the same distance as a
    neighbor is ranked ahead of it.

    Returns ``(ap, precisions, ranks)`` where ``ranks`` counts, for each
    neighbor, the non-neighbors ranked ahead of it plus one.
    """
    m = dist.shape[0]
    is_nb = np.zeros(m, dtype=bool)
    is_nb[list(neighbors)] = True
    keep = np.ones(m, dtype=bool)
    keep[self_index] = False
    d = dist[keep]
    nb = is_nb[keep]
    # Primary key distance, secondary key neighbor flag (non-neighbors first).
    order = np.lexsort((nb, d))
    nb_sorted = nb[order]
    positions = np.flatnonzero(nb_sorted) + 1
    hits = np.arange(1, positions.size + 1)
    precisions = hits / positions
    ap = math.fsum(precisions.tolist()) / positions.size
    return ap, precisions, positions - hits + 1


def map_score(xbar, graph, aggregation="node"):
    """Mean average precision of reconstructing ``graph`` from embedding distances.

    Parameters
    ----------
    xbar : ndarray, shape (n + 1, m)
        Hyperboloid embeddings; column ``i`` belongs to ``graph.labels[i]``.
    graph : ReconstructionGraph
    aggregation : {"node", "edge"}
        ``node`` averages per-node AP over nodes with at least one neighbor;
        ``edge`` weights every node's AP by its degree.

    Returns
    -------
    MapResult
    """
    xbar = hb.validate_hyperboloid(np.asarray(xbar, dtype=np.float64))
    if xbar.ndim != 2 or xbar.shape[1] != len(graph.labels):
        raise DimensionError(
            f"{len(graph.labels)} labels for embeddings of shape {xbar.shape}"
        )
    if not graph.edges:
        raise EmptyInputError("graph has no edges")
    if aggregation not in ("node", "edge"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    adj = graph.adjacency()
    per_node = {}
    weights = []
    rank_sum = 0
    rank_count = 0
    for i, nbrs in enumerate(adj):
        if not nbrs:
            continue
        ap, _, ranks = node_average_precision(distances_from(xbar, i), nbrs, i)
        per_node[graph.labels[i]] = ap
        weights.append(len(nbrs))
        rank_sum += int(ranks.sum())
        rank_count += ranks.size
    aps = list(per_node.values())
    if aggregation == "node":
        score = math.fsum(aps) / len(aps)
    else:
        score = math.fsum(a * w for a, w in zip(aps, weights)) / sum(weights)
    return MapResult(
        map=score,
        per_node_ap=per_node,
        nodes_evaluated=len(aps),
        aggregation=aggregation,
        mean_rank=rank_sum / rank_count,
    )


@dataclass(frozen=True)
class SweepRow:
    rank: int
    method: str
    map: float
    loss: float
    wall_time: float = None
    iterations: int = None

    def to_dict(self, include_timing=True):
        return {
            "rank": self.rank,
            "method": self.method,
            "map": self.map,
            "loss": self.loss,
            "iterations": self.iterations,
            "wall_time": self.wall_time if include_timing else None,
        }


def compress(kind, xbar, r, cfg=None, init="svd-warm", labels=None, trace=None):
    """Run the solver matching ``kind``; returns ``(factorization, loss, report or None)``."""
    from .product import initialize

    kind = LossKind.parse(kind)
    cfg = cfg or TrConfig()
    if kind is LossKind.SPATIAL_EUCLIDEAN:
        f = solve_svd(xbar, r, labels=labels)
        return f, loss_value(kind, f.to_point(), xbar), None
    y0 = initialize(xbar, r, init, cfg.seed)
    f, report = tr_solve(kind, xbar, r, init=y0, cfg=cfg, labels=labels, trace=trace)
    return f, report.final_loss, report


def map_rank_sweep(xbar, graph, ranks, kinds, cfg=None, init="svd-warm"):
    """MAP of every (rank, method) combination plus the uncompressed baseline row.

    Returns a list of :class:`SweepRow`, baseline first, then ranks in the
    given order with methods in the given order within each rank.
    """
    xbar = np.asarray(xbar, dtype=np.float64)
    n = xbar.shape[0] - 1
    t0 = time.perf_counter()
    rows = [SweepRow(n, "baseline", map_score(xbar, graph).map, 0.0,
                     time.perf_counter() - t0, None)]
    for r in ranks:
        for kind in kinds:
            kind = LossKind.parse(kind)
            t0 = time.perf_counter()
            f, loss, report = compress(kind, xbar, r, cfg=cfg, init=init, labels=graph.labels)
            score = map_score(expand(f), graph).map
            rows.append(SweepRow(
                r, kind.value, score, loss, time.perf_counter() - t0,
                None if report is None else report.iterations,
            ))
    return rows


def format_sweep_tsv(rows, dataset=""):
    """Tab-separated sweep table; MAP to four decimals, loss in scientific notation."""
    lines = ["dataset\trank\tmethod\tmap\tloss"]
    for row in rows:
        lines.append(f"{dataset}\t{row.rank}\t{row.method}\t{row.map:.4f}\t{row.loss:.6e}")
    return "\n".join(lines) + "\n"
