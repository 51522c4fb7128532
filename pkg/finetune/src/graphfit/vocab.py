"""Whitespace word tokenizer with a fixed block of reserved ids.

Corpus text comes out of sentence templates, so word-level units keep
sequences short and make memorization probes exact string comparisons.
"""

from __future__ import annotations

from typing import Iterable, Sequence

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
SEP_ID = 4

_SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>", "<sep>")


class WordTokenizer:
    """Maps whitespace-delimited words to ids; unknown words become UNK_ID."""

    def __init__(self, words: Iterable[str]):
        # sorted set keeps the mapping independent of input order
        ordinary = sorted(set(words) - set(_SPECIALS))
        self.id_to_word: list[str] = list(_SPECIALS) + ordinary
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "WordTokenizer":
        return cls(word for text in texts for word in text.split())

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_word)

    def encode(self, text: str) -> list[int]:
        return [self.word_to_id.get(w, UNK_ID) for w in text.split()]

    def words(self, ids: Sequence[int]) -> list[str]:
        """Surface strings for ids; reserved ids keep their angle markers."""
        return [self.id_to_word[i] for i in ids]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(
            word for i, word in zip(ids, self.words(ids)) if i >= len(_SPECIALS)
        )

    def to_dict(self) -> dict:
        return {"words": self.id_to_word[len(_SPECIALS):]}

    @classmethod
    def from_dict(cls, payload: dict) -> "WordTokenizer":
        return cls(payload["words"])
