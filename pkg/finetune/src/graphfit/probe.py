"""Greedy-decode check that a tuned adapter actually memorized its records."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from .corpus import load_stage1, text_hash
from .lora import load_adapter
from .vocab import BOS_ID


@dataclass
class ProbeReport:
    checked: int
    reproduced: int
    excluded: int
    fraction: float
    details: list[dict] = field(default_factory=list)


def memorization_probe(
    adapter_dir: str | Path,
    records: Sequence[str] | str | Path,
    suffix_words: int = 2,
    device: str = "cpu",
) -> ProbeReport:
    """Greedy-decode the last suffix_words of each record from its prefix.

    Records the adapter never trained on (when it carries a training-set
    fingerprint) and records shorter than the suffix are excluded from the
    denominator.  `records` may be raw texts or a stage1 corpus file.
    """
    if isinstance(records, (str, Path)):
        texts = [r.text for r in load_stage1(records)]
    else:
        texts = list(records)
    model, tokenizer, meta = load_adapter(adapter_dir, device=device)
    model.eval()
    trained = meta.get("stage1_text_hashes")
    trained_set = set(trained) if trained is not None else None
    checked = reproduced = excluded = 0
    details = []
    for text in texts:
        words = text.split()
        too_short = len(words) <= suffix_words
        foreign = trained_set is not None and text_hash(text) not in trained_set
        if too_short or foreign:
            excluded += 1
            continue
        checked += 1
        prefix = " ".join(words[:-suffix_words])
        ids = [BOS_ID] + tokenizer.encode(prefix)
        with torch.no_grad():
            for _ in range(suffix_words):
                tokens = torch.tensor([ids], dtype=torch.long, device=device)
                logits = model(tokens)
                ids.append(int(torch.argmax(logits[0, -1]).item()))
        decoded = tokenizer.words(ids[-suffix_words:])
        ok = decoded == words[-suffix_words:]
        reproduced += int(ok)
        details.append(
            {"text": text, "expected": words[-suffix_words:], "decoded": decoded, "ok": ok}
        )
    fraction = reproduced / checked if checked else 0.0
    return ProbeReport(
        checked=checked,
        reproduced=reproduced,
        excluded=excluded,
        fraction=fraction,
        details=details,
    )
