"""Seeded sampling of nodes, edges and bounded BFS subgraphs."""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field

from .errors import UnknownNode
from .graph import EdgeRecord, NodeRecord, TextAttributedGraph

logger = logging.getLogger(__name__)


def derive_seed(base: int, *parts) -> int:
    """Stable child seed from a base seed and any hashable labels."""
    digest = hashlib.sha256(
        ("|".join([str(base), *map(str, parts)])).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class SubgraphSampleConfig:
    """Bounds for BFS subgraph growth.

    ``hops`` layers are expanded from the root; at each visited node at
    most ``max_neighbors_per_node`` previously unvisited neighbors are
    kept, and growth stops outright once ``max_nodes`` nodes are in.
    """

    hops: int = 3
    max_neighbors_per_node: int = 3
    max_nodes: int = 10
    direction: str = "both"
    seed: int = 0

    def __post_init__(self):
        if self.hops < 1:
            raise ValueError("hops must be >= 1")
        if self.max_neighbors_per_node < 1:
            raise ValueError("max_neighbors_per_node must be >= 1")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.direction not in ("out", "in", "both"):
            raise ValueError(f"unknown direction {self.direction!r}")

    def with_seed(self, seed: int) -> "SubgraphSampleConfig":
        return SubgraphSampleConfig(
            hops=self.hops,
            max_neighbors_per_node=self.max_neighbors_per_node,
            max_nodes=self.max_nodes,
            direction=self.direction,
            seed=seed,
        )


@dataclass
class Subgraph:
    """A sampled subgraph: nodes in visit order plus traversal edges."""

    root: str
    node_ids: list[str] = field(default_factory=list)
    edge_indices: list[int] = field(default_factory=list)


def sample_nodes(graph: TextAttributedGraph, k: int, seed: int) -> list[NodeRecord]:
    """k distinct nodes, uniform without replacement, in draw order."""
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = random.Random(seed)
    if k > graph.node_count:
        logger.warning(
            "requested %d nodes but graph has %d; truncating", k, graph.node_count
        )
        k = graph.node_count
    return rng.sample(graph.nodes, k)


def sample_edges(graph: TextAttributedGraph, k: int, seed: int) -> list[EdgeRecord]:
    """k distinct edges, uniform without replacement, in draw order."""
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = random.Random(seed)
    if k > graph.edge_count:
        logger.warning(
            "requested %d edges but graph has %d; truncating", k, graph.edge_count
        )
        k = graph.edge_count
    return rng.sample(graph.edges, k)


def sample_subgraph(
    graph: TextAttributedGraph, root: str, config: SubgraphSampleConfig
) -> Subgraph:
    """Grow a bounded BFS subgraph around ``root``.

    Each hop expands only the nodes added in the previous hop. For every
    frontier node the distinct unvisited neighbors are collected (each
    paired with its lowest incident edge index) and at most
    ``max_neighbors_per_node`` of them are drawn without replacement.
    Already-included neighbors never consume that budget. Growth halts as
    soon as ``max_nodes`` nodes are included.
    """
    if not graph.has_node(root):
        raise UnknownNode(root)
    rng = random.Random(config.seed)
    visited = {root}
    order = [root]
    traversal_edges: list[int] = []
    frontier = [root]
    for _ in range(config.hops):
        if len(visited) >= config.max_nodes or not frontier:
            break
        next_frontier: list[str] = []
        for node_id in frontier:
            budget = config.max_nodes - len(visited)
            if budget <= 0:
                break
            candidates: dict[str, int] = {}
            for edge_idx in graph.neighbor_edge_indices(node_id, config.direction):
                edge = graph.edges[edge_idx]
                other = edge.tgt if edge.src == node_id else edge.src
                if other not in visited and other not in candidates:
                    candidates[other] = edge_idx
            if not candidates:
                continue
            take = min(config.max_neighbors_per_node, len(candidates), budget)
            for neighbor in rng.sample(list(candidates), take):
                visited.add(neighbor)
                order.append(neighbor)
                traversal_edges.append(candidates[neighbor])
                next_frontier.append(neighbor)
        frontier = next_frontier
    return Subgraph(root=root, node_ids=order, edge_indices=traversal_edges)
