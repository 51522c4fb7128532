import random
from pathlib import Path

import pytest

from graphtune.graph import EdgeRecord, NodeRecord, TextAttributedGraph, load_graph

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture
def scene() -> TextAttributedGraph:
    return load_graph(FIXTURES / "scene.json")


@pytest.fixture
def kg() -> TextAttributedGraph:
    return load_graph(
        FIXTURES / "kg.tsv",
        format="triples-tsv",
        nodes_path=FIXTURES / "kg_nodes.tsv",
        title="trade network",
    )


def words(prefix: str, count: int) -> str:
    return " ".join(f"{prefix}{i}" for i in range(count))


def build_uniform_graph(
    n: int, d: int, t_n: int, t_e: int, rng: random.Random
) -> TextAttributedGraph:
    """Every node text has exactly t_n words, every edge feature t_e words,
    and every node has exactly d out-edges, so m = n*d."""
    nodes = [NodeRecord(id=f"n{i}", text=words(f"n{i}w", t_n)) for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(d):
            target = rng.randrange(n)
            edges.append(
                EdgeRecord(
                    src=f"n{i}",
                    rel=words(f"e{i}x{j}w", t_e),
                    tgt=f"n{target}",
                )
            )
    return TextAttributedGraph("uniform", nodes, edges)


def star_graph(leaves: int) -> TextAttributedGraph:
    nodes = [NodeRecord("hub", "the hub")] + [
        NodeRecord(f"leaf{i}", f"leaf number {i}") for i in range(leaves)
    ]
    edges = [EdgeRecord("hub", "links to", f"leaf{i}") for i in range(leaves)]
    return TextAttributedGraph("star", nodes, edges)


def path_graph(length: int) -> TextAttributedGraph:
    nodes = [NodeRecord(f"p{i}", f"stop number {i}") for i in range(length)]
    edges = [EdgeRecord(f"p{i}", "leads to", f"p{i+1}") for i in range(length - 1)]
    return TextAttributedGraph("path", nodes, edges)


def dense_graph(n: int, p: float, seed: int) -> TextAttributedGraph:
    rng = random.Random(seed)
    nodes = [NodeRecord(f"d{i}", f"site number {i}") for i in range(n)]
    edges = [
        EdgeRecord(f"d{i}", "connects to", f"d{j}")
        for i in range(n)
        for j in range(n)
        if i != j and rng.random() < p
    ]
    return TextAttributedGraph("dense", nodes, edges)


def grid_fixture_graph(n: int = 100) -> TextAttributedGraph:
    """Deterministic 100-node fixture with a healthy mix of degrees."""
    nodes = [NodeRecord(f"g{i}", f"station {i} of the line") for i in range(n)]
    edges = []
    for i in range(n):
        edges.append(EdgeRecord(f"g{i}", "feeds into", f"g{(i + 1) % n}"))
        if i % 3 == 0:
            edges.append(EdgeRecord(f"g{i}", "mirrors", f"g{(i + 7) % n}"))
        if i % 5 == 0:
            edges.append(EdgeRecord(f"g{i}", "backs up", f"g{(i + 13) % n}"))
    return TextAttributedGraph("grid", nodes, edges)
