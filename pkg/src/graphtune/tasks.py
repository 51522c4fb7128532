"""Task generation: context records, summaries, context QA and reasoning QA.

Four record families are produced from one graph:

* context records (stage 1): one recitation line per node and per edge,
  |V| + |E| records, no model calls;
* summaries (stage 1): for each of ``n_summary`` sampled nodes, edges and
  subgraphs, one summary plus one rephrased summary, 6 * n_summary records;
* context QA (stage 2): ``n_context_qa`` node-level generated pairs plus
  the same number of template edge-completion pairs, 2 * n_context_qa;
* reasoning QA (stage 2): ``n_reasoning`` rooted subgraphs, two pairs
  each, 2 * n_reasoning records. The question type per subgraph is drawn
  uniformly from multi-hop / global / binary (+ k-shot when training QA
  pairs are supplied).

Model responses are parsed strictly; a malformed response is resampled up
to three times and then dropped. When more than 20% of the targets of a
family fail, generation aborts with GenerationBudgetExceeded carrying the
records produced so far.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .client import ChatClient
from .errors import (
    EndpointError,
    GenerationBudgetExceeded,
    ParseFailure,
    TransportError,
)
from .graph import EdgeRecord, TextAttributedGraph
from .sampling import (
    Subgraph,
    SubgraphSampleConfig,
    derive_seed,
    sample_edges,
    sample_nodes,
    sample_subgraph,
)
from .serialize import edge_clause

logger = logging.getLogger(__name__)

STAGE1 = "stage1"
STAGE2 = "stage2"

KIND_NODE_CONTEXT = "node-context"
KIND_EDGE_CONTEXT = "edge-context"
KIND_SUMMARY = "summary"
KIND_NODE_QA = "node-qa"
KIND_EDGE_QA = "edge-qa"
KIND_REASONING_QA = "reasoning-qa"

STAGE1_KINDS = (KIND_NODE_CONTEXT, KIND_EDGE_CONTEXT, KIND_SUMMARY)
STAGE2_KINDS = (KIND_NODE_QA, KIND_EDGE_QA, KIND_REASONING_QA)

REASONING_BASE_TYPES = ("multi-hop", "global", "binary")
KSHOT_TYPE = "k-shot"
REASONING_PROMPTS = {
    "multi-hop": "multihop_qa",
    "global": "global_qa",
    "binary": "binary_qa",
    KSHOT_TYPE: "kshot_qa",
}

MASKS = ("src", "rel", "tgt")

GENERATION_TEMPERATURE = 0.7
MAX_PARSE_ATTEMPTS = 4  # one draw plus up to three resamples


@dataclass
class TaskRecord:
    stage: str
    kind: str
    plain_text: str | None = None
    user_text: str | None = None
    answer_text: str | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in (STAGE1, STAGE2):
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage == STAGE1:
            has_plain = bool(self.plain_text)
            has_pair = bool(self.user_text) and bool(self.answer_text)
            if not (has_plain or has_pair):
                raise ValueError("stage1 record needs plain_text or a user/answer pair")
        else:
            if not self.user_text or not self.answer_text:
                raise ValueError("stage2 record needs nonempty user and answer text")


@dataclass
class QAPair:
    question: str
    answer: str
    type_tag: str = ""

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be nonempty")
        if "<|>" in self.question:
            raise ValueError("question must not contain the separator token")


@dataclass
class TaskGenConfig:
    """Targets and knobs for one generation run.

    ``n_summary`` counts sampled elements per flavor (nodes, edges,
    subgraphs); ``n_context_qa`` counts node-level and edge-level targets
    each; ``n_reasoning`` counts sampled subgraphs.
    """

    n_summary: int = 0
    n_context_qa: int = 0
    n_reasoning: int = 0
    k_shots: int = 3
    rephrase_edge_qa: bool = False
    seed: int = 0
    train_qa_path: str | None = None
    subgraph: SubgraphSampleConfig = field(default_factory=SubgraphSampleConfig)

    def __post_init__(self):
        for name in ("n_summary", "n_context_qa", "n_reasoning"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.k_shots < 1:
            raise ValueError("k_shots must be >= 1")


def _strip_wrapping(text: str) -> str:
    text = text.strip()
    quotes = ("\"", "'", "“", "”", "‘", "’")
    while len(text) >= 2 and text[0] in quotes and text[-1] in quotes:
        text = text[1:-1].strip()
    return text


def parse_summary_response(text: str) -> str:
    """Extract the payload after the final "Summary:" marker."""
    marker = "Summary:"
    at = text.rfind(marker)
    if at < 0:
        raise ParseFailure("missing 'Summary:' marker")
    payload = _strip_wrapping(text[at + len(marker):])
    if not payload:
        raise ParseFailure("empty summary payload")
    return payload


def parse_qa_response(text: str, expected: int) -> list[QAPair]:
    """Parse "Question: ... Answer: ..." segments separated by "<|>".

    Prose before a segment's last "Question:" marker (evidence sentences,
    "Referred question:" echoes) is discarded. Returns exactly
    ``expected`` pairs or raises ParseFailure; it never mis-pairs a
    question with another segment's answer.
    """
    if expected < 1:
        raise ValueError("expected must be >= 1")
    segments = text.split("<|>")
    if len(segments) != expected:
        raise ParseFailure(
            f"expected {expected} segment(s), found {len(segments)}"
        )
    pairs = []
    for segment in segments:
        q_at = segment.rfind("Question:")
        if q_at < 0:
            raise ParseFailure("segment missing 'Question:' marker")
        rest = segment[q_at + len("Question:"):]
        a_at = rest.find("Answer:")
        if a_at < 0:
            raise ParseFailure("segment missing 'Answer:' marker")
        question = _strip_wrapping(rest[:a_at])
        answer = _strip_wrapping(rest[a_at + len("Answer:"):])
        if not question or not answer:
            raise ParseFailure("empty question or answer payload")
        pairs.append(QAPair(question=question, answer=answer))
    return pairs


def load_train_qa(path: str | Path) -> list[QAPair]:
    """Read training QA pairs (for k-shot prompts) from a JSONL file."""
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            pairs.append(QAPair(question=row["question"], answer=row["answer"]))
    return pairs


class _Generator:
    """Wraps a client with the resample-then-drop retry policy."""

    def __init__(self, client: ChatClient):
        self.client = client

    def generate(self, prompt_text: str, parse):
        request = self.client.make_request(
            [{"role": "user", "content": prompt_text}],
            temperature=GENERATION_TEMPERATURE,
        )
        for attempt in range(MAX_PARSE_ATTEMPTS):
            try:
                response = self.client.complete(request, refresh=attempt > 0)
            except (TransportError, EndpointError) as exc:
                logger.warning("generation call failed: %s", exc)
                return None
            try:
                return parse(response)
            except ParseFailure as exc:
                logger.debug(
                    "malformed response (attempt %d/%d): %s",
                    attempt + 1,
                    MAX_PARSE_ATTEMPTS,
                    exc,
                )
        logger.warning("dropping target after %d malformed responses", MAX_PARSE_ATTEMPTS)
        return None


def _check_budget(failed: int, total: int, records: list[TaskRecord]):
    # abort when the failure rate exceeds 20% (5 * failed > total is exact)
    if total and 5 * failed > total:
        raise GenerationBudgetExceeded(failed, total, records)


def node_context_text(graph: TextAttributedGraph, node_text: str) -> str:
    return prompts.prompt("node_context", title=graph.title, node=node_text)


def edge_context_text(graph: TextAttributedGraph, edge: EdgeRecord) -> str:
    return prompts.prompt(
        "edge_context",
        title=graph.title,
        src=graph.node(edge.src).text,
        rel=edge.feature_text,
        tgt=graph.node(edge.tgt).text,
    )


def gen_context_records(graph: TextAttributedGraph) -> list[TaskRecord]:
    """One stage-1 recitation record per node and per edge."""
    records = []
    for node in graph.nodes:
        records.append(
            TaskRecord(
                stage=STAGE1,
                kind=KIND_NODE_CONTEXT,
                plain_text=node_context_text(graph, node.text),
                provenance={
                    "node_id": node.id,
                    "prompt": prompts.prompt_id("node_context"),
                },
            )
        )
    for index, edge in enumerate(graph.edges):
        records.append(
            TaskRecord(
                stage=STAGE1,
                kind=KIND_EDGE_CONTEXT,
                plain_text=edge_context_text(graph, edge),
                provenance={
                    "edge_index": index,
                    "src": edge.src,
                    "tgt": edge.tgt,
                    "prompt": prompts.prompt_id("edge_context"),
                },
            )
        )
    return records


def subgraph_snippets(graph: TextAttributedGraph, sub: Subgraph) -> list[str]:
    """Text snippets for a subgraph: one clause per edge, then the text of
    every node not covered by any sampled edge."""
    snippets = []
    covered: set[str] = set()
    for edge_index in sub.edge_indices:
        edge = graph.edges[edge_index]
        snippets.append(edge_clause(graph, edge))
        covered.add(edge.src)
        covered.add(edge.tgt)
    for node_id in sub.node_ids:
        if node_id not in covered:
            snippets.append(graph.node(node_id).text)
    return snippets


def _summary_record(graph: TextAttributedGraph, summary: str, provenance: dict):
    return TaskRecord(
        stage=STAGE1,
        kind=KIND_SUMMARY,
        plain_text=prompts.prompt(
            "summary_record", title=graph.title, summary=summary
        ),
        provenance=provenance,
    )


def gen_summaries(
    graph: TextAttributedGraph, cfg: TaskGenConfig, client: ChatClient
) -> list[TaskRecord]:
    """Summary + rephrase records for sampled nodes, edges and subgraphs."""
    records: list[TaskRecord] = []
    if cfg.n_summary == 0 or graph.node_count == 0:
        return records
    generator = _Generator(client)
    failed = 0

    targets: list[tuple[str, str, dict]] = []  # (context text, label, provenance)
    for node in sample_nodes(graph, cfg.n_summary, derive_seed(cfg.seed, "summary-nodes")):
        targets.append(
            (node_context_text(graph, node.text), "node", {"node_id": node.id})
        )
    for edge in sample_edges(graph, cfg.n_summary, derive_seed(cfg.seed, "summary-edges")):
        targets.append(
            (
                edge_context_text(graph, edge),
                "edge",
                {"src": edge.src, "rel": edge.rel, "tgt": edge.tgt},
            )
        )
    root_rng = random.Random(derive_seed(cfg.seed, "summary-roots"))
    for index in range(cfg.n_summary):
        root = root_rng.choice(graph.nodes).id
        sub_seed = derive_seed(cfg.seed, "summary-subgraph", index)
        sub = sample_subgraph(graph, root, cfg.subgraph.with_seed(sub_seed))
        context = "\n".join(subgraph_snippets(graph, sub))
        targets.append(
            (context, "subgraph", {"root": root, "index": index, "seed": sub_seed})
        )

    total = 2 * len(targets)
    for context, label, element in targets:
        base = {"target": label, **element, "seed_base": cfg.seed}
        summary = generator.generate(
            prompts.prompt("summary", context=context), parse_summary_response
        )
        if summary is None:
            failed += 1
        else:
            records.append(
                _summary_record(
                    graph,
                    summary,
                    {**base, "variant": "summary", "prompt": prompts.prompt_id("summary")},
                )
            )
        # the rephrase prompt tolerates a missing summary by design
        rephrased = generator.generate(
            prompts.prompt("rephrase", context=context, summary=summary or ""),
            parse_summary_response,
        )
        if rephrased is None:
            failed += 1
        else:
            records.append(
                _summary_record(
                    graph,
                    rephrased,
                    {**base, "variant": "rephrase", "prompt": prompts.prompt_id("rephrase")},
                )
            )
    _check_budget(failed, total, records)
    return records


def gen_edge_qa(edge: EdgeRecord, mask: str) -> QAPair:
    """Template edge-completion QA; ``edge`` carries display texts."""
    if mask not in MASKS:
        raise ValueError(f"mask must be one of {MASKS}")
    rel = edge.feature_text
    if mask == "src":
        question = prompts.prompt("edge_qa_src", rel=rel, tgt=edge.tgt)
        answer = edge.src
    elif mask == "rel":
        question = prompts.prompt("edge_qa_rel", src=edge.src, tgt=edge.tgt)
        answer = rel
    else:
        question = prompts.prompt("edge_qa_tgt", rel=rel, src=edge.src)
        answer = edge.tgt
    return QAPair(question=question, answer=answer, type_tag=f"edge-{mask}")


def _display_edge(graph: TextAttributedGraph, edge: EdgeRecord) -> EdgeRecord:
    return EdgeRecord(
        src=graph.node(edge.src).text,
        rel=edge.rel,
        tgt=graph.node(edge.tgt).text,
        text=edge.text,
    )


def gen_context_qa(
    graph: TextAttributedGraph, cfg: TaskGenConfig, client: ChatClient
) -> list[TaskRecord]:
    """Node-level generated QA plus edge-level template QA (stage 2)."""
    records: list[TaskRecord] = []
    if cfg.n_context_qa == 0:
        return records
    generator = _Generator(client)
    failed = 0

    node_targets = sample_nodes(
        graph, cfg.n_context_qa, derive_seed(cfg.seed, "context-qa-nodes")
    )
    edge_targets = sample_edges(
        graph, cfg.n_context_qa, derive_seed(cfg.seed, "context-qa-edges")
    )
    total = len(node_targets) + len(edge_targets)

    for node in node_targets:
        parsed = generator.generate(
            prompts.prompt("node_qa", node=node.text),
            lambda text: parse_qa_response(text, expected=1),
        )
        if parsed is None:
            failed += 1
            continue
        pair = parsed[0]
        records.append(
            TaskRecord(
                stage=STAGE2,
                kind=KIND_NODE_QA,
                user_text=pair.question,
                answer_text=pair.answer,
                provenance={
                    "node_id": node.id,
                    "prompt": prompts.prompt_id("node_qa"),
                    "seed_base": cfg.seed,
                },
            )
        )

    mask_rng = random.Random(derive_seed(cfg.seed, "context-qa-masks"))
    for edge in edge_targets:
        mask = mask_rng.choice(MASKS)
        display = _display_edge(graph, edge)
        pair = gen_edge_qa(display, mask)
        template = f"edge_qa_{mask}"
        provenance = {
            "src": edge.src,
            "rel": edge.rel,
            "tgt": edge.tgt,
            "mask": mask,
            "prompt": prompts.prompt_id(template),
            "seed_base": cfg.seed,
        }
        if cfg.rephrase_edge_qa:
            rephrased = generator.generate(
                prompts.prompt(
                    "edge_qa_rephrase",
                    fact=edge_clause(graph, edge),
                    question=pair.question,
                    answer=pair.answer,
                ),
                lambda text: parse_qa_response(text, expected=1),
            )
            if rephrased is not None:
                pair = QAPair(
                    question=rephrased[0].question,
                    answer=rephrased[0].answer,
                    type_tag=pair.type_tag,
                )
                provenance["rephrased"] = True
            # on failure the template pair stands, so counts never shrink
        records.append(
            TaskRecord(
                stage=STAGE2,
                kind=KIND_EDGE_QA,
                user_text=pair.question,
                answer_text=pair.answer,
                provenance=provenance,
            )
        )
    _check_budget(failed, total, records)
    return records


def _render_shots(shots: list[QAPair]) -> str:
    return "\n".join(f"Question: {p.question} Answer: {p.answer}" for p in shots)


def gen_reasoning_qa(
    graph: TextAttributedGraph,
    cfg: TaskGenConfig,
    client: ChatClient,
    train_qa: list[QAPair] | None = None,
) -> list[TaskRecord]:
    """Two reasoning QA records per sampled subgraph (stage 2)."""
    records: list[TaskRecord] = []
    if cfg.n_reasoning == 0 or graph.node_count == 0:
        return records
    generator = _Generator(client)
    failed = 0

    pool = list(REASONING_BASE_TYPES)
    if train_qa:
        pool.append(KSHOT_TYPE)
    type_rng = random.Random(derive_seed(cfg.seed, "reasoning-types"))
    root_rng = random.Random(derive_seed(cfg.seed, "reasoning-roots"))

    total = 2 * cfg.n_reasoning
    for index in range(cfg.n_reasoning):
        root = root_rng.choice(graph.nodes).id
        sub_seed = derive_seed(cfg.seed, "reasoning-subgraph", index)
        sub = sample_subgraph(graph, root, cfg.subgraph.with_seed(sub_seed))
        context = "\n".join(subgraph_snippets(graph, sub))
        qa_type = type_rng.choice(pool)
        prompt_name = REASONING_PROMPTS[qa_type]
        if qa_type == KSHOT_TYPE:
            shot_rng = random.Random(derive_seed(cfg.seed, "reasoning-shots", index))
            shots = shot_rng.sample(train_qa, min(cfg.k_shots, len(train_qa)))
            prompt_text = prompts.prompt(
                prompt_name,
                {"sample questions": _render_shots(shots)},
                context=context,
            )
        else:
            prompt_text = prompts.prompt(prompt_name, context=context)
        parsed = generator.generate(
            prompt_text, lambda text: parse_qa_response(text, expected=2)
        )
        if parsed is None:
            failed += 2
            continue
        for position, pair in enumerate(parsed):
            records.append(
                TaskRecord(
                    stage=STAGE2,
                    kind=KIND_REASONING_QA,
                    user_text=pair.question,
                    answer_text=pair.answer,
                    provenance={
                        "root": root,
                        "index": index,
                        "pair": position,
                        "qa_type": qa_type,
                        "prompt": prompts.prompt_id(prompt_name),
                        "seed": sub_seed,
                        "seed_base": cfg.seed,
                    },
                )
            )
    _check_budget(failed, total, records)
    return records


def generate_all(
    graph: TextAttributedGraph,
    cfg: TaskGenConfig,
    client: ChatClient,
    train_qa: list[QAPair] | None = None,
) -> list[TaskRecord]:
    """Run every family; on budget overrun re-raise with the partial set."""
    records = gen_context_records(graph)
    try:
        records.extend(gen_summaries(graph, cfg, client))
        records.extend(gen_context_qa(graph, cfg, client))
        records.extend(gen_reasoning_qa(graph, cfg, client, train_qa))
    except GenerationBudgetExceeded as exc:
        raise GenerationBudgetExceeded(
            exc.failed, exc.total, records + exc.records
        ) from None
    return records
