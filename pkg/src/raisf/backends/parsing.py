"""Strict readers for the three sub-model output formats.

Each parser either returns a value or raises a :class:`~raisf.errors.ParseError`
subclass; none of them lets another exception escape.
"""

from __future__ import annotations

import re

from ..core import Decomposition, KnowledgeVerdict, RelevanceVerdict
from ..errors import EmptyDecomposition, UnparsableRelevance, UnparsableVerdict

_WORD = re.compile(r"[^\W_]+")
_BRACKETED = re.compile(r"\[\s*(\d+)\s*\]")
_NUMBERED = re.compile(r"^\s*\d+\s*[.)]\s*(.*?)\s*$")
_BULLET = re.compile(r"^\s*[-*•]\s*")


def _first_word(raw: str) -> str | None:
    m = _WORD.search(raw)
    return m.group(0).lower() if m else None


def parse_knowledge_verdict(raw: str) -> KnowledgeVerdict:
    word = _first_word(raw)
    if word == "yes":
        return KnowledgeVerdict.KNOW
    if word == "no":
        return KnowledgeVerdict.UNKNOW
    raise UnparsableVerdict(f"expected yes/no, got {raw[:80]!r}")


def parse_relevance_single(raw: str) -> RelevanceVerdict:
    word = _first_word(raw)
    if word in ("relevant", "yes"):
        return RelevanceVerdict.RELEVANT
    if word in ("irrelevant", "no"):
        return RelevanceVerdict.IRRELEVANT
    raise UnparsableVerdict(f"expected relevant/irrelevant, got {raw[:80]!r}")


def parse_relevance_batch(raw: str, num_passages: int) -> set[int]:
    """Zero-based indices of the paragraphs a batch relevance answer selects.

    A reply starting with "no" selects nothing. Otherwise every ``[i]`` with
    ``1 <= i <= num_passages`` counts; out-of-range numbers are ignored.
    """
    if num_passages < 1:
        raise ValueError("num_passages must be >= 1")
    text = raw.strip()
    if text[:2].lower() == "no":
        return set()
    picked = {int(m.group(1)) - 1 for m in _BRACKETED.finditer(text)}
    picked = {i for i in picked if 0 <= i < num_passages}
    if not picked:
        raise UnparsableRelevance(f"no paragraph index in {raw[:80]!r}")
    return picked


def parse_decomposition(raw: str) -> Decomposition:
    lines = raw.splitlines()
    numbered = [m.group(1) for line in lines if (m := _NUMBERED.match(line))]
    subs = [q for q in numbered if q]
    if not numbered:
        subs = [_BULLET.sub("", line).strip() for line in lines if line.strip().endswith("?")]
        subs = [q for q in subs if q]
    if not subs:
        raise EmptyDecomposition(f"no sub-questions in {raw[:80]!r}")
    return Decomposition(tuple(subs))
