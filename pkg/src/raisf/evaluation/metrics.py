"""Exact Match with SQuAD-style answer normalisation."""

from __future__ import annotations

import string
import unicodedata
from typing import Sequence

_ARTICLES = frozenset({"a", "an", "the"})
_ASCII_PUNCT = frozenset(string.punctuation)


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if not _is_punct(ch))
    return " ".join(w for w in text.split() if w not in _ARTICLES)


def exact_match(prediction: str, golds: Sequence[str], *, strict: bool = False) -> bool:
    """True if a normalised gold equals the normalised prediction.

    Unless ``strict``, a gold that appears in the prediction as a run of whole
    words also counts, so "It was passed on November 6, 1986." matches
    "November 6, 1986".
    """
    if not golds:
        raise ValueError("at least one gold answer is required")
    pred = normalize_answer(prediction)
    padded = f" {pred} "
    for gold in golds:
        g = normalize_answer(gold)
        if g == pred:
            return True
        if not strict and g and f" {g} " in padded:
            return True
    return False
