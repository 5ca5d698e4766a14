"""Text formats for embeddings, edge lists and factorization bundles; synthetic trees.

Embedding files hold one node per line, ``label<TAB>v1<TAB>...<TAB>vk``.
Edge files hold one ``label<TAB>label`` pair per line; edges are undirected.
A factorization bundle is a directory::

    U.tsv          n rows x r columns
    Z.tsv          r rows x m columns
    z0.tsv         1 row x m columns
    labels.txt     m lines
    manifest.json  n, m, r, method, loss, sha256 of the three matrix files

Numbers are written with ``repr`` so that every float round-trips exactly.
"""

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from . import hyperbolic as hb
from .errors import (
    ChecksumError,
    ConstraintViolationError,
    HyperloreError,
    NumericError,
    ParseError,
)
from .evaluation import ReconstructionGraph, map_score
from .product import FactoredEmbedding

MATRIX_FILES = ("U.tsv", "Z.tsv", "z0.tsv")

#: Smallest edge length (found by sweep, to 2e-3) for which every complete
#: tree with branching <= 3 and depth <= 4 reconstructs with MAP 1.
MIN_GOLD_EDGE_LENGTH = 1.45
DEFAULT_EDGE_LENGTH = 1.5
_GOLD_MAX_BRANCHING = 3
_GOLD_MAX_DEPTH = 4


def _fmt(x):
    return repr(float(x))


def _parse_float(token, path, lineno):
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {token!r}", path, lineno)
    return v


def read_embeddings(path, model="poincare"):
    """Load an embedding file as hyperboloid columns.

    Parameters
    ----------
    path : str or Path
    model : {"poincare", "hyperboloid"}
        Coordinates in the file. Poincare rows are validated and mapped onto
        the hyperboloid.

    Returns
    -------
    xbar : ndarray, shape (n + 1, m)
    labels : tuple of str
    """
    if model not in ("poincare", "hyperboloid"):
        raise ValueError(f"unknown model {model!r}")
    path = Path(path)
    if not path.is_file():
        raise ParseError("no such file", path)
    labels = []
    rows = []
    seen = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ParseError("expected a label followed by coordinates", path, lineno)
            label = parts[0]
            if label in seen:
                raise ParseError(f"duplicate label {label!r} (first on line {seen[label]})", path, lineno)
            if width is None:
                width = len(parts) - 1
            elif len(parts) - 1 != width:
                raise ParseError(f"expected {width} coordinates, found {len(parts) - 1}", path, lineno)
            coords = np.array([_parse_float(t, path, lineno) for t in parts[1:]])
            try:
                if model == "poincare":
                    coords = hb.poincare_to_hyperboloid(coords)
                else:
                    hb.validate_hyperboloid(coords)
            except (ConstraintViolationError, NumericError) as exc:
                raise ParseError(f"label {label!r}: {exc}", path, lineno) from None
            seen[label] = lineno
            labels.append(label)
            rows.append(coords)
    if not rows:
        raise ParseError("file contains no embeddings", path)
    return np.column_stack(rows), tuple(labels)


def write_embeddings(path, xbar, labels, model="hyperboloid"):
    xbar = np.asarray(xbar, dtype=np.float64)
    coords = hb.hyperboloid_to_poincare(xbar) if model == "poincare" else xbar
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, col in zip(labels, coords.T):
            fh.write(label + "\t" + "\t".join(_fmt(v) for v in col) + "\n")


def read_edges(path, labels):
    """Parse a tab-separated edge list into an undirected :class:`ReconstructionGraph`."""
    path = Path(path)
    if not path.is_file():
        raise ParseError("no such file", path)
    known = set(labels)
    pairs = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected exactly two tab-separated labels", path, lineno)
            u, v = parts
            for lab in (u, v):
                if lab not in known:
                    raise ParseError(f"unknown label {lab!r}", path, lineno)
            if u == v:
                raise ParseError(f"self-loop on {u!r}", path, lineno)
            pairs.add(tuple(sorted((u, v))))
    return ReconstructionGraph(tuple(labels), frozenset(pairs))


def write_edges(path, graph):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in sorted(graph.edges):
            fh.write(f"{u}\t{v}\n")


def _write_matrix(path, a):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.atleast_2d(a):
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def _read_matrix(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line:
                rows.append([_parse_float(t, path, lineno) for t in line.split("\t")])
    if len({len(r) for r in rows}) > 1:
        raise ParseError("ragged matrix", path)
    return np.array(rows, dtype=np.float64)


def _digest(directory):
    h = hashlib.sha256()
    for name in MATRIX_FILES:
        h.update(name.encode())
        h.update((Path(directory) / name).read_bytes())
    return h.hexdigest()


def write_factorization(f, directory, method="", loss=None):
    """Persist a :class:`FactoredEmbedding` as a bundle directory."""
    f.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "U.tsv", f.U)
    _write_matrix(directory / "Z.tsv", f.Z)
    _write_matrix(directory / "z0.tsv", f.z0[None, :])
    labels = f.labels if f.labels is not None else tuple(str(i) for i in range(f.m))
    with open(directory / "labels.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(lab + "\n" for lab in labels))
    manifest = {
        "n": f.n,
        "m": f.m,
        "r": f.r,
        "method": method,
        "loss": loss,
        "sha256": _digest(directory),
    }
    with open(directory / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


def read_factorization(directory):
    """Load and fully validate a bundle written by :func:`write_factorization`."""
    directory = Path(directory)
    for name in MATRIX_FILES + ("labels.txt", "manifest.json"):
        if not (directory / name).is_file():
            raise ParseError("missing bundle file", directory / name)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if _digest(directory) != manifest.get("sha256"):
        raise ChecksumError(f"{directory}: matrix files do not match the manifest checksum")
    u = _read_matrix(directory / "U.tsv")
    z = _read_matrix(directory / "Z.tsv")
    z0 = _read_matrix(directory / "z0.tsv")
    with open(directory / "labels.txt", encoding="utf-8") as fh:
        labels = tuple(line.rstrip("\r\n") for line in fh if line.strip())
    if z0.shape[0] != 1:
        raise ParseError("z0.tsv must hold exactly one row", directory / "z0.tsv")
    n, m, r = manifest["n"], manifest["m"], manifest["r"]
    if u.shape != (n, r) or z.shape != (r, m) or z0.shape[1] != m or len(labels) != m:
        raise ParseError("matrix shapes disagree with the manifest", directory / "manifest.json")
    f = FactoredEmbedding(u, z, z0[0], labels)
    f.validate()
    return f


def read_manifest(directory):
    with open(Path(directory) / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


# -- synthetic ground truth -------------------------------------------------


def _tree_h2(branching, depth, edge_length):
    """Complete tree in H^2 with equal edge lengths and equal angles at every node."""
    root = np.array([1.0, 0.0, 0.0])
    points = [root]
    parents = [-1]
    ch, sh = np.cosh(edge_length), np.sinh(edge_length)
    # (index, outgoing unit tangent directions) for the current level
    level = []
    for k in range(branching):
        a = 2.0 * np.pi * k / branching
        level.append((0, np.array([0.0, np.cos(a), np.sin(a)])))
    for d in range(depth):
        nxt = []
        for parent, direction in level:
            p = points[parent]
            child = ch * p + sh * direction
            child = hb.lift_to_hyperboloid(child[1:])
            idx = len(points)
            points.append(child)
            parents.append(parent)
            if d + 1 < depth:
                back = -(sh * p + ch * direction)
                back = hb.project_to_hyperbolic_tangent(child, back)
                back /= np.sqrt(hb.lorentz_inner(back, back))
                # Lorentz-orthonormal partner of ``back`` in the tangent plane.
                perp = np.cross(child, back)
                perp[0] = -perp[0]
                perp = hb.project_to_hyperbolic_tangent(child, perp)
                perp -= back * hb.lorentz_inner(back, perp)
                perp /= np.sqrt(hb.lorentz_inner(perp, perp))
                for k in range(1, branching + 1):
                    a = 2.0 * np.pi * k / (branching + 1)
                    nxt.append((idx, np.cos(a) * back + np.sin(a) * perp))
        level = nxt
    return np.column_stack(points), parents


def _boost(xbar, axis, s):
    """Lorentz boost mixing x0 with spatial coordinate ``axis`` (1-based) by rapidity ``s``."""
    out = xbar.copy()
    c, sh = np.cosh(s), np.sinh(s)
    out[0] = c * xbar[0] + sh * xbar[axis]
    out[axis] = sh * xbar[0] + c * xbar[axis]
    return out


def synthesize_tree(branching, depth, ambient_dim, edge_length=DEFAULT_EDGE_LENGTH,
                    seed=0, copies=1):
    """Complete ``branching``-ary tree with an exactly rank-``2 * copies`` hyperboloid embedding.

    The tree is drawn in H^2 (root at the base point, every edge of hyperbolic
    length ``edge_length``, children spread at equal angles around each node),
    padded with zeros to H^n and rotated by a seeded random orthogonal matrix
    acting on the spatial coordinates. With ``copies > 1`` every copy lives in
    its own 2-plane and is pushed away from the origin by a boost inside that
    plane before the rotation, so the planted spatial rank becomes ``2 * copies``.

    Returns
    -------
    xbar : ndarray, shape (ambient_dim + 1, m)
    graph : ReconstructionGraph
    planted_rank : int
    gold_map : float
        MAP of the generated embedding.

    Raises
    ------
    HyperloreError
        For a single copy with ``branching <= 3`` and ``depth <= 4`` whose gold
        MAP is not exactly 1 (edge length too short).
    """
    if branching < 2 or depth < 1:
        raise ValueError("need branching >= 2 and depth >= 1")
    if copies < 1:
        raise ValueError("copies must be positive")
    planted = 2 * copies
    if ambient_dim < max(2, planted):
        raise ValueError(f"ambient_dim must be at least {max(2, planted)}")
    if not edge_length > 0:
        raise ValueError("edge_length must be positive")
    base, parents = _tree_h2(branching, depth, edge_length)
    size = base.shape[1]
    blocks = []
    labels = []
    pairs = []
    for c in range(copies):
        block = np.zeros((ambient_dim + 1, size))
        block[0] = base[0]
        block[1 + 2 * c] = base[1]
        block[2 + 2 * c] = base[2]
        if copies > 1:
            block = _boost(block, 1 + 2 * c, edge_length * (depth + 1))
        blocks.append(block)
        prefix = f"c{c}_" if copies > 1 else ""
        names = [f"{prefix}n{i}" for i in range(size)]
        labels += names
        pairs += [(names[i], names[p]) for i, p in enumerate(parents) if p >= 0]
    xbar = np.hstack(blocks)
    rng = np.random.default_rng(seed)
    q, rr = np.linalg.qr(rng.standard_normal((ambient_dim, ambient_dim)))
    q *= np.where(np.diag(rr) < 0, -1.0, 1.0)
    xbar = np.vstack([xbar[:1], q @ xbar[1:]])
    xbar = hb.lift_to_hyperboloid(xbar[1:])
    graph = ReconstructionGraph.from_pairs(labels, pairs)
    gold = map_score(xbar, graph).map
    if copies == 1 and branching <= _GOLD_MAX_BRANCHING and depth <= _GOLD_MAX_DEPTH and gold != 1.0:
        raise HyperloreError(
            f"gold MAP is {gold:.6f} < 1 for branching={branching}, depth={depth}, "
            f"edge_length={edge_length}; use edge_length >= {MIN_GOLD_EDGE_LENGTH}"
        )
    return xbar, graph, planted, gold


def threads_from_env(default=None):
    value = os.environ.get("HYPERLORE_THREADS")
    if value is None or not value.strip():
        return default
    return int(value)
