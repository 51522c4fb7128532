"""Graph-to-text serialization schemes and token accounting.

Two schemes are supported:

* ``edge-with-index``: a numbered node list followed by an edge list that
  refers to nodes by their 1-based position::

      Node list:
      1. the man; 2. the tree; ...

      Edge list:
      1 is on the left of 2; 1 is sitting on 4; ...

* ``edge-list``: one clause per edge with full node texts spelled out,
  clauses joined by "; " and closed with a period::

      the man is on the left of the tree; the man is sitting on the chair.

The expected token footprints are ``n*t_n + n*d*t_e`` for edge-with-index
and ``2*n*d*t_n + n*d*t_e`` for edge-list, where n is the node count, d
the mean out-degree and t_n/t_e the mean node/edge feature lengths. Those
formulas count text features only; ids, numbering and section headers are
reported separately in TokenStats.
"""

from __future__ import annotations

from dataclasses import dataclass

import requests

from .errors import EndpointError, TransportError
from .graph import EdgeRecord, TextAttributedGraph

EDGE_WITH_INDEX = "edge-with-index"
EDGE_LIST = "edge-list"
METHODS = (EDGE_WITH_INDEX, EDGE_LIST)


class TokenCounter:
    """Counts tokens by whitespace splitting or via an external endpoint.

    The endpoint mode POSTs ``{"texts": [...]}`` and expects
    ``{"counts": [...]}`` back with one integer per input text.
    """

    def __init__(
        self,
        mode: str = "whitespace",
        endpoint: str | None = None,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        if mode not in ("whitespace", "endpoint"):
            raise ValueError(f"unknown counter mode {mode!r}")
        if mode == "endpoint" and not endpoint:
            raise ValueError("endpoint mode requires an endpoint URL")
        self.mode = mode
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = session

    def count(self, text: str) -> int:
        return self.count_many([text])[0]

    def count_many(self, texts: list[str]) -> list[int]:
        if self.mode == "whitespace":
            return [len(t.split()) for t in texts]
        return self._count_remote(texts)

    def _count_remote(self, texts: list[str]) -> list[int]:
        if not texts:
            return []
        session = self._session or requests
        try:
            response = session.post(
                self.endpoint, json={"texts": texts}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"token counter unreachable: {exc}") from exc
        if response.status_code != 200:
            raise EndpointError(response.status_code, response.text)
        try:
            counts = response.json()["counts"]
        except (ValueError, KeyError):
            raise EndpointError(response.status_code, response.text) from None
        if not isinstance(counts, list) or len(counts) != len(texts):
            raise EndpointError(
                response.status_code, "counts length does not match texts"
            )
        return [int(c) for c in counts]


@dataclass
class TokenStats:
    """Token accounting for one serialized graph.

    ``feature_total`` counts node/edge text features only (what the
    theoretical formulas model); ``content_total`` additionally includes
    ids and numbering; ``exact_total`` is the count of the full emitted
    string, section headers included. For edge-list all three coincide
    under whitespace counting and the section fields collapse
    (node_section_tokens is 0, edge_section_tokens covers everything).
    """

    method: str
    node_count: int
    edge_count: int
    mean_out_degree: float
    mean_node_tokens: float
    mean_edge_tokens: float
    node_section_tokens: int
    edge_section_tokens: int
    content_total: int
    feature_total: int
    exact_total: int


def count_tokens(text: str, counter: TokenCounter | None = None) -> int:
    return (counter or TokenCounter()).count(text)


def theoretical_token_cost(
    node_count: int,
    mean_out_degree: float,
    mean_node_tokens: float,
    mean_edge_tokens: float,
    method: str,
) -> float:
    """Expected feature-token footprint of a serialization scheme."""
    n, d, t_n, t_e = node_count, mean_out_degree, mean_node_tokens, mean_edge_tokens
    if method == EDGE_WITH_INDEX:
        return n * t_n + n * d * t_e
    if method == EDGE_LIST:
        return 2 * n * d * t_n + n * d * t_e
    raise ValueError(f"unknown serialization method {method!r}")


def edge_clause(graph: TextAttributedGraph, edge: EdgeRecord) -> str:
    """One edge spelled out with full node texts."""
    return (
        f"{graph.node(edge.src).text} {edge.feature_text} {graph.node(edge.tgt).text}"
    )


def _base_stats(
    graph: TextAttributedGraph, counter: TokenCounter
) -> tuple[list[int], list[int], float, float, float]:
    node_counts = counter.count_many([n.text for n in graph.nodes])
    edge_counts = counter.count_many([e.feature_text for e in graph.edges])
    n, m = graph.node_count, graph.edge_count
    d = m / n if n else 0.0
    t_n = sum(node_counts) / n if n else 0.0
    t_e = sum(edge_counts) / m if m else 0.0
    return node_counts, edge_counts, d, t_n, t_e


def serialize_edge_with_index(
    graph: TextAttributedGraph, counter: TokenCounter | None = None
) -> tuple[str, TokenStats]:
    counter = counter or TokenCounter()
    node_items = [f"{i}. {node.text};" for i, node in enumerate(graph.nodes, start=1)]
    edge_items = [
        f"{graph.node_position(e.src) + 1} {e.feature_text}"
        f" {graph.node_position(e.tgt) + 1};"
        for e in graph.edges
    ]
    node_line = " ".join(node_items)
    edge_line = " ".join(edge_items)
    text = f"Node list:\n{node_line}\n\nEdge list:\n{edge_line}"
    node_counts, edge_counts, d, t_n, t_e = _base_stats(graph, counter)
    node_section = counter.count(node_line) if node_line else 0
    edge_section = counter.count(edge_line) if edge_line else 0
    stats = TokenStats(
        method=EDGE_WITH_INDEX,
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        mean_out_degree=d,
        mean_node_tokens=t_n,
        mean_edge_tokens=t_e,
        node_section_tokens=node_section,
        edge_section_tokens=edge_section,
        content_total=node_section + edge_section,
        feature_total=sum(node_counts) + sum(edge_counts),
        exact_total=counter.count(text),
    )
    return text, stats


def serialize_edge_list(
    graph: TextAttributedGraph, counter: TokenCounter | None = None
) -> tuple[str, TokenStats]:
    clauses = [edge_clause(graph, e) for e in graph.edges]
    text = "; ".join(clauses) + "." if clauses else ""
    counter = counter or TokenCounter()
    node_counts, edge_counts, d, t_n, t_e = _base_stats(graph, counter)
    by_id = {node.id: count for node, count in zip(graph.nodes, node_counts)}
    feature_total = sum(
        by_id[e.src] + feat + by_id[e.tgt]
        for e, feat in zip(graph.edges, edge_counts)
    )
    total = counter.count(text) if text else 0
    stats = TokenStats(
        method=EDGE_LIST,
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        mean_out_degree=d,
        mean_node_tokens=t_n,
        mean_edge_tokens=t_e,
        node_section_tokens=0,
        edge_section_tokens=total,
        content_total=total,
        feature_total=feature_total,
        exact_total=total,
    )
    return text, stats


def serialize(
    graph: TextAttributedGraph,
    method: str,
    counter: TokenCounter | None = None,
) -> tuple[str, TokenStats]:
    if method == EDGE_WITH_INDEX:
        return serialize_edge_with_index(graph, counter)
    if method == EDGE_LIST:
        return serialize_edge_list(graph, counter)
    raise ValueError(f"unknown serialization method {method!r}")
