"""Text-attributed graph model: records, adjacency, loading and validation.

A graph is a list of nodes and a list of directed edges. Every node has an
id and a text feature; every edge is a (src, rel, tgt) triplet with an
optional text feature of its own (the relation string is used as the edge
feature when no dedicated text is present). Node and edge order is
significant and preserved by every load/save round trip.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, UnknownNode, ValidationError

logger = logging.getLogger(__name__)

GRAPH_JSON = "graph-json"
TRIPLES_TSV = "triples-tsv"


@dataclass(frozen=True)
class NodeRecord:
    id: str
    text: str


@dataclass(frozen=True)
class EdgeRecord:
    src: str
    rel: str
    tgt: str
    text: str | None = None

    @property
    def feature_text(self) -> str:
        """The edge's text feature; falls back to the relation string."""
        return self.text if self.text is not None else self.rel


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    node_count: int = 0
    edge_count: int = 0

    def ok(self) -> bool:
        return not self.errors


class TextAttributedGraph:
    """Immutable-by-convention graph with prebuilt adjacency indexes."""

    def __init__(self, title: str, nodes: list[NodeRecord], edges: list[EdgeRecord]):
        self.title = title
        self.nodes = list(nodes)
        self.edges = list(edges)
        self._node_index: dict[str, int] = {}
        for pos, node in enumerate(self.nodes):
            # first occurrence wins; duplicates are reported by validate()
            self._node_index.setdefault(node.id, pos)
        self._out: dict[str, list[int]] = {n.id: [] for n in self.nodes}
        self._in: dict[str, list[int]] = {n.id: [] for n in self.nodes}
        for idx, edge in enumerate(self.edges):
            if edge.src in self._out:
                self._out[edge.src].append(idx)
            if edge.tgt in self._in:
                self._in[edge.tgt].append(idx)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    def node(self, node_id: str) -> NodeRecord:
        try:
            return self.nodes[self._node_index[node_id]]
        except KeyError:
            raise UnknownNode(node_id) from None

    def node_position(self, node_id: str) -> int:
        """0-based position of a node in the node list."""
        try:
            return self._node_index[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def out_edges(self, node_id: str) -> list[EdgeRecord]:
        return [self.edges[i] for i in self.out_edge_indices(node_id)]

    def in_edges(self, node_id: str) -> list[EdgeRecord]:
        return [self.edges[i] for i in self.in_edge_indices(node_id)]

    def out_edge_indices(self, node_id: str) -> list[int]:
        if node_id not in self._out:
            raise UnknownNode(node_id)
        return list(self._out[node_id])

    def in_edge_indices(self, node_id: str) -> list[int]:
        if node_id not in self._in:
            raise UnknownNode(node_id)
        return list(self._in[node_id])

    def neighbors(
        self, node_id: str, direction: str = "both"
    ) -> list[tuple[EdgeRecord, NodeRecord]]:
        """Adjacent (edge, other-endpoint) pairs of a node.

        ``direction`` is "out", "in" or "both"; "both" lists outgoing
        edges first, then incoming, each in edge order. A self-loop shows
        up twice under "both", once per direction.
        """
        if direction not in ("out", "in", "both"):
            raise ValueError(f"unknown direction {direction!r}")
        if not self.has_node(node_id):
            raise UnknownNode(node_id)
        pairs: list[tuple[EdgeRecord, NodeRecord]] = []
        if direction in ("out", "both"):
            for idx in self._out[node_id]:
                edge = self.edges[idx]
                pairs.append((edge, self.node(edge.tgt)))
        if direction in ("in", "both"):
            for idx in self._in[node_id]:
                edge = self.edges[idx]
                pairs.append((edge, self.node(edge.src)))
        return pairs

    def neighbor_edge_indices(
        self, node_id: str, direction: str = "both"
    ) -> list[int]:
        """Edge indices incident to a node, same ordering as neighbors()."""
        if direction not in ("out", "in", "both"):
            raise ValueError(f"unknown direction {direction!r}")
        if not self.has_node(node_id):
            raise UnknownNode(node_id)
        indices: list[int] = []
        if direction in ("out", "both"):
            indices.extend(self._out[node_id])
        if direction in ("in", "both"):
            indices.extend(self._in[node_id])
        return indices

    def relation_vocabulary(self) -> list[str]:
        """Distinct relation strings in first-appearance order."""
        seen: dict[str, None] = {}
        for edge in self.edges:
            seen.setdefault(edge.rel, None)
        return list(seen)


def validate(graph: TextAttributedGraph) -> ValidationReport:
    """Check structural invariants and return a report (never raises)."""
    report = ValidationReport(
        node_count=graph.node_count, edge_count=graph.edge_count
    )
    seen: set[str] = set()
    for node in graph.nodes:
        if node.id in seen:
            report.errors.append(f"duplicate node id {node.id!r}")
        seen.add(node.id)
        if not node.id:
            report.errors.append("empty node id")
        if not node.text.strip():
            report.errors.append(f"node {node.id!r} has empty text")
    for pos, edge in enumerate(graph.edges):
        if edge.src not in seen:
            report.errors.append(f"edge {pos} references unknown node {edge.src!r}")
        if edge.tgt not in seen:
            report.errors.append(f"edge {pos} references unknown node {edge.tgt!r}")
        if not edge.rel.strip():
            report.errors.append(f"edge {pos} has an empty relation")
        if edge.text is not None and not edge.text.strip():
            report.errors.append(f"edge {pos} has empty text")
    # adjacency indexes must agree with the edge list
    for idx, edge in enumerate(graph.edges):
        if edge.src in seen and idx not in graph._out.get(edge.src, []):
            report.errors.append(f"edge {idx} missing from out-adjacency")
        if edge.tgt in seen and idx not in graph._in.get(edge.tgt, []):
            report.errors.append(f"edge {idx} missing from in-adjacency")
    return report


def _check(graph: TextAttributedGraph) -> TextAttributedGraph:
    report = validate(graph)
    if not report.ok():
        raise ValidationError(report)
    return graph


def load_graph(
    path: str | Path,
    format: str | None = None,
    nodes_path: str | Path | None = None,
    title: str | None = None,
) -> TextAttributedGraph:
    """Load a graph from disk and validate it.

    ``format`` is "graph-json" or "triples-tsv"; when omitted it is
    inferred from the file suffix (.json vs anything else). For the TSV
    format an optional two-column ``nodes_path`` sidecar supplies node
    texts; ids without a sidecar entry use the id itself as text, and
    sidecar ids that never occur in a triplet become isolated nodes.
    """
    path = Path(path)
    if format is None:
        format = GRAPH_JSON if path.suffix.lower() == ".json" else TRIPLES_TSV
    if format == GRAPH_JSON:
        return _check(_load_graph_json(path, title))
    if format == TRIPLES_TSV:
        return _check(_load_triples_tsv(path, nodes_path, title))
    raise ValueError(f"unknown graph format {format!r}")


def _load_graph_json(path: Path, title: str | None) -> TextAttributedGraph:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ParseError(0, "top-level value must be an object")
    nodes = []
    for pos, raw in enumerate(payload.get("nodes", [])):
        if not isinstance(raw, dict) or "id" not in raw or "text" not in raw:
            raise ParseError(0, f"node {pos} must be an object with id and text")
        nodes.append(NodeRecord(id=str(raw["id"]), text=str(raw["text"])))
    edges = []
    for pos, raw in enumerate(payload.get("edges", [])):
        if not isinstance(raw, dict) or not {"src", "rel", "tgt"} <= raw.keys():
            raise ParseError(0, f"edge {pos} must be an object with src, rel, tgt")
        text = raw.get("text")
        edges.append(
            EdgeRecord(
                src=str(raw["src"]),
                rel=str(raw["rel"]),
                tgt=str(raw["tgt"]),
                text=None if text is None else str(text),
            )
        )
    resolved = title or payload.get("title") or path.stem
    return TextAttributedGraph(str(resolved), nodes, edges)


def _read_tsv_rows(path: Path, width: int) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != width:
                raise ParseError(
                    lineno, f"expected {width} tab-separated fields, got {len(fields)}"
                )
            fields = [f.strip() for f in fields]
            if any(not f for f in fields):
                raise ParseError(lineno, "empty field")
            rows.append((lineno, fields))
    return rows


def _load_triples_tsv(
    path: Path, nodes_path: str | Path | None, title: str | None
) -> TextAttributedGraph:
    texts: dict[str, str] = {}
    if nodes_path:
        for _, (node_id, text) in _read_tsv_rows(Path(nodes_path), 2):
            texts[node_id] = text
    order: dict[str, None] = {}
    edges = []
    for _, (src, rel, tgt) in _read_tsv_rows(path, 3):
        order.setdefault(src, None)
        order.setdefault(tgt, None)
        edges.append(EdgeRecord(src=src, rel=rel, tgt=tgt))
    for node_id in texts:
        # sidecar-only ids become isolated nodes, appended after triple ids
        order.setdefault(node_id, None)
    nodes = [NodeRecord(id=i, text=texts.get(i, i)) for i in order]
    return TextAttributedGraph(title or path.stem, nodes, edges)


def save_graph(graph: TextAttributedGraph, path: str | Path) -> None:
    """Write a graph as graph-json. load_graph(save_graph(g)) == g."""
    payload = {
        "title": graph.title,
        "nodes": [{"id": n.id, "text": n.text} for n in graph.nodes],
        "edges": [
            {"src": e.src, "rel": e.rel, "tgt": e.tgt}
            | ({"text": e.text} if e.text is not None else {})
            for e in graph.edges
        ],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_test_triples(path: str | Path) -> list[EdgeRecord]:
    """Read held-out (src, rel, tgt) triples from a three-column TSV."""
    return [
        EdgeRecord(src=s, rel=r, tgt=t)
        for _, (s, r, t) in _read_tsv_rows(Path(path), 3)
    ]
