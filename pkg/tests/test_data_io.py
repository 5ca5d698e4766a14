import json

import numpy as np
import pytest

from hyperlore import hyperbolic as hb
from hyperlore.data_io import (
    MIN_GOLD_EDGE_LENGTH,
    read_edges,
    read_embeddings,
    read_factorization,
    read_manifest,
    synthesize_tree,
    threads_from_env,
    write_edges,
    write_embeddings,
    write_factorization,
)
from hyperlore.errors import ChecksumError, ConstraintViolationError, HyperloreError, ParseError
from hyperlore.evaluation import map_score
from hyperlore.product import FactoredEmbedding, expand
from hyperlore.svd import solve_svd, spatial_error

from helpers import random_ball, random_hyperboloid, random_point


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_origin_lifts_to_base_point(tmp_path):
    xbar, labels = read_embeddings(_write(tmp_path / "e.tsv", "root\t0.0\t0.0\n"))
    np.testing.assert_array_equal(xbar, [[1.0], [0.0], [0.0]])
    assert labels == ("root",)


def test_boundary_row_rejected(tmp_path):
    p = _write(tmp_path / "e.tsv", "a\t0.1\t0.2\nedge\t0.999999999999\t0.0\n")
    with pytest.raises(ParseError, match="edge") as info:
        read_embeddings(p)
    assert info.value.line == 2


@pytest.mark.parametrize("model", ["poincare", "hyperboloid"])
def test_roundtrip(tmp_path, model):
    rng = np.random.default_rng(0)
    xbar = hb.poincare_to_hyperboloid(random_ball(6, 40, rng))
    labels = [f"node.{i}" for i in range(40)]
    p = tmp_path / "e.tsv"
    write_embeddings(p, xbar, labels, model=model)
    back, got = read_embeddings(p, model=model)
    assert got == tuple(labels)
    np.testing.assert_allclose(back, xbar, rtol=1e-12, atol=1e-12)
    if model == "hyperboloid":
        np.testing.assert_array_equal(back, xbar)


@pytest.mark.parametrize("text, line, pattern", [
    ("a\t0.1\nb\t0.2\t0.3\n", 2, "expected 1 coordinates"),
    ("a\t0.1\nb\tx\n", 2, "not a number"),
    ("a\t0.1\n\nb\tnan\n", 3, "non-finite"),
    ("a\t0.1\na\t0.2\n", 2, "duplicate label 'a'"),
    ("lonely\n", 1, "expected a label"),
])
def test_parse_errors_carry_line_numbers(tmp_path, text, line, pattern):
    with pytest.raises(ParseError, match=pattern) as info:
        read_embeddings(_write(tmp_path / "e.tsv", text))
    assert info.value.line == line
    assert f":{line}" in str(info.value)


def test_hyperboloid_rows_validated(tmp_path):
    p = _write(tmp_path / "e.tsv", "a\t1.0\t0.0\nb\t1.5\t0.0\n")
    with pytest.raises(ParseError, match="'b'"):
        read_embeddings(p, model="hyperboloid")


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(ParseError, match="nope.tsv"):
        read_embeddings(tmp_path / "nope.tsv")
    with pytest.raises(ParseError):
        read_embeddings(_write(tmp_path / "e.tsv", "\n\n"))
    with pytest.raises(ValueError):
        read_embeddings(tmp_path / "e.tsv", model="klein")


def test_edges_dedup_and_errors(tmp_path):
    g = read_edges(_write(tmp_path / "g.tsv", "a\tb\nb\ta\n\n"), ["a", "b", "c"])
    assert g.edges == frozenset({("a", "b")})
    assert g.labels == ("a", "b", "c")
    with pytest.raises(ParseError, match="self-loop") as info:
        read_edges(_write(tmp_path / "g.tsv", "a\tb\na\ta\n"), "abc")
    assert info.value.line == 2
    with pytest.raises(ParseError, match="unknown label 'z'") as info:
        read_edges(_write(tmp_path / "g.tsv", "a\tb\nb\tc\nz\ta\n"), "abc")
    assert info.value.line == 3
    with pytest.raises(ParseError, match="two"):
        read_edges(_write(tmp_path / "g.tsv", "a\tb\tc\n"), "abc")


def test_mammal_scale_edge_file(tmp_path):
    rng = np.random.default_rng(1)
    labels = [f"mammal_{i:04d}.n.01" for i in range(1180)]
    lines = set()
    # a tree guarantees every label appears; random extra pairs fill up to 6,540 lines
    for i in range(1, 1180):
        lines.add((labels[i], labels[int(rng.integers(i))]))
    while len(lines) < 6540 - 40:
        a, b = rng.choice(1180, size=2, replace=False)
        lines.add((labels[a], labels[b]))
    lines = sorted(lines)
    lines += [(v, u) for u, v in lines[:40]]  # reversed duplicates
    assert len(lines) == 6540
    p = _write(tmp_path / "mammal_closure.tsv", "".join(f"{u}\t{v}\n" for u, v in lines))
    g = read_edges(p, labels)
    assert len(g.edges) <= 6540
    assert len(g.edges) == len({tuple(sorted(e)) for e in lines})
    out = tmp_path / "out.tsv"
    write_edges(out, g)
    assert read_edges(out, labels) == g


def test_factorization_roundtrip(tmp_path):
    y = random_point(9, 14, 3, np.random.default_rng(2), scale=2.0)
    f = FactoredEmbedding.from_point(y, labels=[f"l{i}" for i in range(14)])
    write_factorization(f, tmp_path / "b", method="svd", loss=0.25)
    g = read_factorization(tmp_path / "b")
    np.testing.assert_array_equal(g.U, f.U)
    np.testing.assert_array_equal(g.Z, f.Z)
    np.testing.assert_array_equal(g.z0, f.z0)
    assert g.labels == f.labels
    x = expand(g)
    assert np.max(np.abs(hb.lorentz_inner(x, x) + 1) / x[0] ** 2) < 1e-12
    m = read_manifest(tmp_path / "b")
    assert (m["n"], m["m"], m["r"], m["method"], m["loss"]) == (9, 14, 3, "svd", 0.25)


def test_tampered_bundle_rejected(tmp_path):
    y = random_point(5, 6, 2, np.random.default_rng(3))
    d = write_factorization(FactoredEmbedding.from_point(y), tmp_path / "b")
    z = (d / "Z.tsv").read_text()
    (d / "Z.tsv").write_text(z.replace("1", "2", 1))
    with pytest.raises(ChecksumError):
        read_factorization(d)
    (d / "Z.tsv").write_text(z)
    read_factorization(d)
    (d / "labels.txt").unlink()
    with pytest.raises(ParseError, match="labels.txt"):
        read_factorization(d)


def test_bundle_invariants_checked_after_checksum(tmp_path):
    y = random_point(5, 6, 2, np.random.default_rng(4))
    d = write_factorization(FactoredEmbedding.from_point(y), tmp_path / "b")
    manifest = json.loads((d / "manifest.json").read_text())
    manifest["r"] = 3
    (d / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ParseError, match="shapes"):
        read_factorization(d)


def test_write_rejects_invalid_factorization(tmp_path):
    y = random_point(5, 6, 2, np.random.default_rng(5))
    f = FactoredEmbedding(2 * y.U, y.Z, y.z0)
    with pytest.raises(ConstraintViolationError):
        write_factorization(f, tmp_path / "b")
    assert not (tmp_path / "b").exists()


def test_synthesize_small_tree():
    xbar, g, planted, gold = synthesize_tree(2, 1, 2, edge_length=1.7, seed=0)
    assert xbar.shape == (3, 3) and planted == 2
    assert g.edges == frozenset({("n0", "n1"), ("n0", "n2")})
    d1 = hb.hyperboloid_distance(xbar[:, 0], xbar[:, 1])
    d2 = hb.hyperboloid_distance(xbar[:, 0], xbar[:, 2])
    assert d1 == pytest.approx(1.7, rel=1e-12) and d2 == pytest.approx(1.7, rel=1e-12)
    assert gold == 1.0


@pytest.mark.parametrize("b, depth", [(2, 4), (3, 3), (3, 4)])
def test_synthesize_planted_rank_and_gold(b, depth):
    xbar, g, planted, gold = synthesize_tree(b, depth, 50, seed=7)
    hb.validate_hyperboloid(xbar)
    assert xbar.shape[1] == sum(b**k for k in range(depth + 1))
    assert len(g.edges) == xbar.shape[1] - 1
    s = np.linalg.svd(xbar[1:], compute_uv=False)
    assert np.all(s[:2] > 1e-9) and np.all(s[2:] < 1e-9)
    assert gold == 1.0
    f = solve_svd(xbar, 2, labels=g.labels)
    assert spatial_error(f, xbar) < 1e-18
    assert map_score(expand(f), g).map == gold


def test_synthesize_copies_raise_planted_rank():
    xbar, g, planted, gold = synthesize_tree(2, 3, 10, seed=1, copies=3)
    assert planted == 6 and xbar.shape[1] == 3 * 15 and len(g.edges) == 3 * 14
    s = np.linalg.svd(xbar[1:], compute_uv=False)
    assert np.sum(s > 1e-9 * s[0]) == 6
    assert 0.0 < gold <= 1.0


def test_synthesize_deterministic_and_seeded():
    a = synthesize_tree(2, 3, 8, seed=4)[0]
    np.testing.assert_array_equal(a, synthesize_tree(2, 3, 8, seed=4)[0])
    assert not np.array_equal(a, synthesize_tree(2, 3, 8, seed=5)[0])


def test_synthesize_short_edges_rejected():
    with pytest.raises(HyperloreError, match="gold MAP"):
        synthesize_tree(3, 4, 5, edge_length=0.5)
    synthesize_tree(3, 4, 5, edge_length=MIN_GOLD_EDGE_LENGTH)
    for bad in [(1, 2, 5), (2, 0, 5), (2, 2, 1)]:
        with pytest.raises(ValueError):
            synthesize_tree(*bad)
    with pytest.raises(ValueError):
        synthesize_tree(2, 2, 5, edge_length=0.0)
    with pytest.raises(ValueError):
        synthesize_tree(2, 2, 3, copies=2)


def test_threads_from_env(monkeypatch):
    monkeypatch.delenv("HYPERLORE_THREADS", raising=False)
    assert threads_from_env(4) == 4
    monkeypatch.setenv("HYPERLORE_THREADS", "2")
    assert threads_from_env() == 2


def test_random_hyperboloid_file_roundtrip_is_bit_exact(tmp_path):
    xbar = random_hyperboloid(3, 20, np.random.default_rng(8), scale=4.0)
    p = tmp_path / "h.tsv"
    write_embeddings(p, xbar, [str(i) for i in range(20)])
    first = p.read_bytes()
    back, labels = read_embeddings(p, "hyperboloid")
    write_embeddings(p, back, labels)
    assert p.read_bytes() == first
