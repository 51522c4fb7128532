"""Deterministic response handlers for offline runs.

The cooperative handler recognizes which prompt family a request belongs
to by its leading text and answers in the exact output format that family
expects. Responses are pure functions of the prompt (a short digest of
the prompt text is woven into the payload), so whole pipeline runs are
reproducible without a server.
"""

from __future__ import annotations

import hashlib
import re

from .client import GenerationRequest


def _tag(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()[:8]


def _extract(content: str, marker: str) -> str:
    if marker not in content:
        return ""
    return content.split(marker, 1)[1].split("\n", 1)[0].strip()


def cooperative_handler(request: GenerationRequest) -> str:
    """Well-formed synthetic answer for any known prompt family."""
    content = request.last_user_content()
    tag = _tag(content)
    if content.startswith("You are given several text snippets, which representing"):
        return f"Summary: Synthetic digest {tag} of the provided facts."
    if content.startswith("You are given several text snippets, which represent"):
        return f"Summary: Reworded digest {tag} of the provided facts."
    if content.startswith("You are given one sentence"):
        return (
            f"Question: Which detail does sample {tag} describe? "
            f"Answer: detail {tag}"
        )
    if content.startswith("You are given one question"):
        answer = _extract(content, "The answer is provided below: ") or f"echo {tag}"
        return f"Question: Stated differently, what completes fact {tag}? Answer: {answer}"
    if "answerable with either yes or no" in content:
        return (
            f"Evidence: snippet {tag}. Question: Does sample {tag} hold? Answer: yes "
            f"<|> Question: Does sample {tag} conflict? Answer: no"
        )
    if content.startswith("You are given several text snippets from a graph as context, along with"):
        return (
            f"Referred question: style probe {tag} Question: What follows from sample {tag}? "
            f"Answer: outcome {tag} <|> Referred question: second probe {tag} "
            f"Question: What precedes sample {tag}? Answer: origin {tag}"
        )
    if content.startswith("You are given several text snippets from a graph as context."):
        return (
            f"Evidence: snippet {tag}. Question: What links the facts in sample {tag}? "
            f"Answer: link {tag} <|> Question: What results from sample {tag}? "
            f"Answer: result {tag}"
        )
    if content.startswith("You are an impartial grader"):
        return "EQUIVALENT"
    return f"Question: What is sample {tag}? Answer: sample {tag}"


def malformed_handler(request: GenerationRequest) -> str:
    """Never matches any expected output format."""
    return "no format here"


_OPTION_LINE = re.compile(r"^([A-J])\. (.*)$", re.MULTILINE)


def oracle_handler_for(items):
    """Handler that always answers eval items with their gold text.

    Looks the item up by its question, which is the user content after
    the optional context block (context and question are joined by a
    blank line and the question itself never contains one).
    """
    by_question = {item.question: item.gold for item in items}

    def handler(request: GenerationRequest) -> str:
        content = request.last_user_content()
        question = content if content in by_question else content.split("\n\n", 1)[-1]
        gold = by_question.get(question)
        if gold is None:
            raise KeyError(f"no eval item matches: {question[:80]}")
        return gold

    return handler


def random_option_handler(seed: int = 0):
    """Pick uniformly among the lettered options, per-item deterministic."""
    import random

    def handler(request: GenerationRequest) -> str:
        content = request.last_user_content()
        options = _OPTION_LINE.findall(content)
        if not options:
            return ""
        rng = random.Random(f"{seed}:{_tag(content)}")
        return rng.choice(options)[1]

    return handler
