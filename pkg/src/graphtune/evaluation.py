"""Evaluation harness: 10-way relation items, scoring, token accounting.

Items ask for the relation between two entities, offering the gold
relation among nine seeded distractors as lettered options. A served
model is queried either bare or with a serialized context subgraph
prepended; predictions are scored by normalized exact match or by a
judge model, and the report tracks mean input tokens plus the sum of
per-call latencies.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .client import ChatClient
from .errors import (
    EndpointError,
    JudgeParseFailure,
    TransportError,
    UnknownNode,
    VocabTooSmall,
)
from .graph import EdgeRecord, TextAttributedGraph
from .sampling import SubgraphSampleConfig, derive_seed, sample_subgraph
from .serialize import TokenCounter, edge_clause

logger = logging.getLogger(__name__)

OPTION_LETTERS = "ABCDEFGHIJ"
CHOICE_COUNT = 10
JUDGE_ATTEMPTS = 3

CHOICE_HEADER = "Select the correct relation from the following candidates:"
CHOICE_FOOTER = "Answer with the relation text only."


@dataclass
class EvalItem:
    item_id: str
    question: str
    gold: str
    candidates: list[str] | None = None
    context: str | None = None

    def __post_init__(self):
        if self.candidates is not None:
            if len(self.candidates) != CHOICE_COUNT:
                raise ValueError(f"10-way items need exactly {CHOICE_COUNT} candidates")
            if len(set(self.candidates)) != CHOICE_COUNT:
                raise ValueError("candidates must be unique")
            if self.gold not in self.candidates:
                raise ValueError("gold answer must be among the candidates")

    def gold_letter(self) -> str | None:
        if self.candidates is None:
            return None
        return OPTION_LETTERS[self.candidates.index(self.gold)]


@dataclass
class ItemVerdict:
    item_id: str
    correct: bool
    prediction: str | None = None
    input_tokens: int = 0
    seconds: float = 0.0
    error: str | None = None
    flagged: bool = False


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    avg_input_tokens: float
    total_seconds: float
    scorer: str
    with_context: bool
    verdicts: list[ItemVerdict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "avg_input_tokens": self.avg_input_tokens,
            "total_seconds": self.total_seconds,
            "scorer": self.scorer,
            "with_context": self.with_context,
            "verdicts": [vars(v) for v in self.verdicts],
        }


def _choice_question(src_text: str, tgt_text: str, candidates: list[str]) -> str:
    stem = prompts.prompt("edge_qa_rel", src=src_text, tgt=tgt_text)
    options = "\n".join(
        f"{OPTION_LETTERS[i]}. {rel}" for i, rel in enumerate(candidates)
    )
    return f"{stem}\n{CHOICE_HEADER}\n{options}\n{CHOICE_FOOTER}"


def _entity_context(
    graph: TextAttributedGraph,
    src: str,
    tgt: str,
    seed: int,
    sample_config: SubgraphSampleConfig,
) -> str:
    """Edge-list text of the union of subgraphs rooted at both entities."""
    edge_indices: set[int] = set()
    for label, root in (("src", src), ("tgt", tgt)):
        try:
            sub = sample_subgraph(
                graph, root, sample_config.with_seed(derive_seed(seed, label, root))
            )
        except UnknownNode:
            continue
        edge_indices.update(sub.edge_indices)
    clauses = [edge_clause(graph, graph.edges[i]) for i in sorted(edge_indices)]
    return "; ".join(clauses) + "." if clauses else ""


def build_kg_eval_items(
    graph: TextAttributedGraph,
    test_triples: list[EdgeRecord],
    relation_vocab: list[str] | None = None,
    seed: int = 0,
    with_context: bool = False,
    context_hops: int = 2,
    sample_config: SubgraphSampleConfig | None = None,
) -> list[EvalItem]:
    """10-way relation-classification items for held-out triples.

    The gold relation is hidden among nine distractors drawn uniformly
    without replacement from the vocabulary; ordering is shuffled under
    ``seed``, and context subgraphs (when requested) use seeds derived
    from it, so a fixed seed reproduces the items exactly.
    """
    vocab = relation_vocab if relation_vocab is not None else graph.relation_vocabulary()
    if len(set(vocab)) < CHOICE_COUNT:
        raise VocabTooSmall(
            f"need at least {CHOICE_COUNT} distinct relations, have {len(set(vocab))}"
        )
    vocab = list(dict.fromkeys(vocab))
    rng = random.Random(seed)
    if sample_config is None:
        sample_config = SubgraphSampleConfig(hops=max(1, context_hops))
    else:
        sample_config = SubgraphSampleConfig(
            hops=max(1, context_hops),
            max_neighbors_per_node=sample_config.max_neighbors_per_node,
            max_nodes=sample_config.max_nodes,
            direction=sample_config.direction,
        )
    items = []
    for index, triple in enumerate(test_triples):
        if triple.rel not in vocab:
            raise ValueError(f"test triple {index} has unknown relation {triple.rel!r}")
        distractors = rng.sample([r for r in vocab if r != triple.rel], CHOICE_COUNT - 1)
        candidates = distractors + [triple.rel]
        rng.shuffle(candidates)
        src_text = graph.node(triple.src).text if graph.has_node(triple.src) else triple.src
        tgt_text = graph.node(triple.tgt).text if graph.has_node(triple.tgt) else triple.tgt
        context = None
        if with_context:
            context = (
                _entity_context(graph, triple.src, triple.tgt, derive_seed(seed, index), sample_config)
                or None
            )
        items.append(
            EvalItem(
                item_id=f"kg-{index}",
                question=_choice_question(src_text, tgt_text, candidates),
                gold=triple.rel,
                candidates=candidates,
                context=context,
            )
        )
    return items


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


def score_exact(prediction: str, item: EvalItem) -> bool:
    """Case-insensitive, whitespace-normalized match against the gold
    text; 10-way items also accept the gold letter or "letter. gold"."""
    normalized = _normalize(prediction)
    if normalized == _normalize(item.gold):
        return True
    letter = item.gold_letter()
    if letter is None:
        return False
    return normalized in (letter.casefold(), _normalize(f"{letter}. {item.gold}"))


def score_judge(prediction: str, item: EvalItem, client: ChatClient) -> bool:
    """Semantic-equivalence verdict from a judge model at temperature 0.

    Exact matches short-circuit without a judge call. The verdict token
    must be EQUIVALENT or DIFFERENT; after three unreadable responses
    JudgeParseFailure is raised.
    """
    if score_exact(prediction, item):
        return True
    prompt_text = prompts.prompt(
        "judge", question=item.question, gold=item.gold, prediction=prediction
    )
    request = client.make_request(
        [{"role": "user", "content": prompt_text}], temperature=0.0
    )
    for attempt in range(JUDGE_ATTEMPTS):
        response = client.complete(request, refresh=attempt > 0)
        token = response.strip().split()[0].strip(".,:;!").upper() if response.strip() else ""
        if token == "EQUIVALENT":
            return True
        if token == "DIFFERENT":
            return False
        logger.debug("unreadable judge verdict (attempt %d): %r", attempt + 1, response)
    raise JudgeParseFailure(f"no verdict after {JUDGE_ATTEMPTS} attempts")


def run_eval(
    items: list[EvalItem],
    client: ChatClient,
    scorer: str = "exact",
    counter: TokenCounter | None = None,
    judge_client: ChatClient | None = None,
    use_context: bool = True,
    max_tokens: int | None = None,
) -> EvalReport:
    """Query the served model for every item and score the predictions.

    ``total_seconds`` is the sum of per-call latencies (not wall clock of
    the loop), and ``avg_input_tokens`` is the mean token count of the
    exact user content sent, so context cost shows up one-for-one.
    """
    if scorer not in ("exact", "judge"):
        raise ValueError(f"unknown scorer {scorer!r}")
    if scorer == "judge" and judge_client is None:
        raise ValueError("judge scorer needs a judge client")
    counter = counter or TokenCounter()
    verdicts = []
    correct = 0
    used_context = False
    for item in items:
        if use_context and item.context:
            content = f"{item.context}\n\n{item.question}"
            used_context = True
        else:
            content = item.question
        tokens = counter.count(content)
        request = client.make_request(
            [{"role": "user", "content": content}],
            temperature=0.0,
            max_tokens=max_tokens,
        )
        started = time.perf_counter()
        try:
            prediction = client.complete(request)
        except (TransportError, EndpointError) as exc:
            verdicts.append(
                ItemVerdict(
                    item_id=item.item_id,
                    correct=False,
                    input_tokens=tokens,
                    seconds=time.perf_counter() - started,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        elapsed = time.perf_counter() - started
        flagged = False
        if scorer == "exact":
            is_correct = score_exact(prediction, item)
        else:
            try:
                is_correct = score_judge(prediction, item, judge_client)
            except JudgeParseFailure:
                is_correct = False
                flagged = True
        correct += is_correct
        verdicts.append(
            ItemVerdict(
                item_id=item.item_id,
                correct=is_correct,
                prediction=prediction,
                input_tokens=tokens,
                seconds=elapsed,
                flagged=flagged,
            )
        )
    total = len(items)
    return EvalReport(
        accuracy=correct / total if total else 0.0,
        correct=correct,
        total=total,
        avg_input_tokens=(
            sum(v.input_tokens for v in verdicts) / total if total else 0.0
        ),
        total_seconds=sum(v.seconds for v in verdicts),
        scorer=scorer,
        with_context=used_context,
        verdicts=verdicts,
    )


def save_items(items: list[EvalItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item in items:
            handle.write(json.dumps(vars(item), ensure_ascii=False) + "\n")


def load_items(path: str | Path) -> list[EvalItem]:
    items = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                items.append(EvalItem(**json.loads(line)))
    return items


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
