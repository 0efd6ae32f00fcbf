"""Deterministic table-driven backend for tests and offline runs.

The backend sees exactly what a live model would see: a role and a rendered
prompt. It recovers the question and context by matching the prompt against
the catalog templates, then answers from the behaviour tables.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..core import UNKNOWN_TEXT, DecodingSettings, KnowledgeVerdict, RelevanceVerdict
from ..errors import BackendRefusal, BackendUnavailable
from .base import ModelRole
from .prompts import DEFAULT_CATALOG, PromptCatalog, PromptSite, parse_passages_block, parse_subqa_block

ANY_CONTEXT = "*"
DIRECT_CONTEXT = ""

_SITES_BY_ROLE = {
    ModelRole.ANSWERER: (PromptSite.ANSWER_WITH_PASSAGES, PromptSite.AGGREGATE, PromptSite.ANSWER_DIRECT),
    ModelRole.SELF_KNOWLEDGE: (PromptSite.KNOW_PROBE,),
    ModelRole.RELEVANCE: (PromptSite.RELEVANCE_PROBE, PromptSite.RELEVANCE_SINGLE),
    ModelRole.DECOMPOSER: (PromptSite.DECOMPOSE,),
}


def norm(text: str) -> str:
    return " ".join(text.split())


def _digest(payload: Any) -> str:
    blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def passages_fingerprint(texts: Sequence[str]) -> str:
    return "p:" + _digest([norm(t) for t in texts])


def subqa_fingerprint(pairs: Sequence[tuple[str, str]]) -> str:
    return "s:" + _digest([[norm(q), norm(a)] for q, a in pairs])


def placeholder_answer(question: str) -> str:
    return f"<unmapped:{hashlib.sha1(norm(question).encode('utf-8')).hexdigest()[:8]}>"


@dataclass(frozen=True)
class ScriptedBehavior:
    """Lookup tables driving :class:`ScriptedBackend`.

    ``answers`` is keyed by ``(question, context)`` where context is ``""``
    for a closed-book answer, a :func:`passages_fingerprint` or
    :func:`subqa_fingerprint`, or ``"*"`` for any context. ``evidence`` maps
    ``(question, passage text)`` to the answer a model gives once that passage
    is in its prompt. Questions in ``unavailable`` make every call fail as if
    the server were down.
    """

    know: Mapping[str, KnowledgeVerdict] = field(default_factory=dict)
    answers: Mapping[tuple[str, str], str] = field(default_factory=dict)
    relevance: Mapping[tuple[str, str], RelevanceVerdict] = field(default_factory=dict)
    decompositions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    evidence: Mapping[tuple[str, str], str] = field(default_factory=dict)
    default_verdict: KnowledgeVerdict = KnowledgeVerdict.UNKNOW
    unavailable: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "know", {norm(q): KnowledgeVerdict(v) for q, v in self.know.items()})
        set_(self, "answers", {(norm(q), c): a for (q, c), a in self.answers.items()})
        set_(self, "relevance", {(norm(q), norm(p)): RelevanceVerdict(v) for (q, p), v in self.relevance.items()})
        set_(self, "decompositions", {norm(q): tuple(s) for q, s in self.decompositions.items()})
        set_(self, "evidence", {(norm(q), norm(p)): a for (q, p), a in self.evidence.items()})
        set_(self, "default_verdict", KnowledgeVerdict(self.default_verdict))
        set_(self, "unavailable", frozenset(norm(q) for q in self.unavailable))

    def to_dict(self) -> dict[str, Any]:
        return {
            "default_verdict": self.default_verdict.value,
            "know": {q: v.value for q, v in sorted(self.know.items())},
            "answers": [{"question": q, "context": c, "answer": a} for (q, c), a in sorted(self.answers.items())],
            "relevance": [
                {"question": q, "passage": p, "verdict": v.value} for (q, p), v in sorted(self.relevance.items())
            ],
            "evidence": [{"question": q, "passage": p, "answer": a} for (q, p), a in sorted(self.evidence.items())],
            "decompositions": {q: list(s) for q, s in sorted(self.decompositions.items())},
            "unavailable": sorted(self.unavailable),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScriptedBehavior:
        return cls(
            know=data.get("know", {}),
            answers={(e["question"], e.get("context", DIRECT_CONTEXT)): e["answer"] for e in data.get("answers", [])},
            relevance={(e["question"], e["passage"]): e["verdict"] for e in data.get("relevance", [])},
            decompositions=data.get("decompositions", {}),
            evidence={(e["question"], e["passage"]): e["answer"] for e in data.get("evidence", [])},
            default_verdict=data.get("default_verdict", KnowledgeVerdict.UNKNOW.value),
            unavailable=frozenset(data.get("unavailable", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> ScriptedBehavior:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class ScriptedBackend:
    """Answers from a :class:`ScriptedBehavior`; same input, same output, always."""

    def __init__(self, behavior: ScriptedBehavior, catalog: PromptCatalog = DEFAULT_CATALOG) -> None:
        self.behavior = behavior
        self.catalog = catalog

    def complete(self, role: ModelRole, prompt: str, decoding: DecodingSettings | None = None) -> str:
        if not prompt.strip():
            raise ValueError("empty prompt")
        role = ModelRole(role)
        for site in _SITES_BY_ROLE[role]:
            slots = self.catalog.match(site, prompt)
            if slots is not None:
                break
        else:
            return placeholder_answer(prompt)
        question = norm(slots["question"])
        if question in self.behavior.unavailable:
            raise BackendUnavailable(f"scripted outage for {question!r}")
        out = self._respond(site, question, slots)
        if not out.strip():
            raise BackendRefusal(f"empty completion for {question!r}")
        return out

    def _respond(self, site: PromptSite, question: str, slots: dict[str, str]) -> str:
        b = self.behavior
        if site is PromptSite.KNOW_PROBE:
            verdict = b.know.get(question, b.default_verdict)
            return "Yes." if verdict is KnowledgeVerdict.KNOW else "No"
        if site is PromptSite.DECOMPOSE:
            subs = b.decompositions.get(question)
            if not subs:
                return "This question cannot be broken down further."
            return "\n".join(f"{i}. {q}" for i, q in enumerate(subs, 1))
        if site in (PromptSite.RELEVANCE_PROBE, PromptSite.RELEVANCE_SINGLE):
            texts = parse_passages_block(slots["passages"])
            hits = [
                (i, t) for i, t in enumerate(texts, 1)
                if b.relevance.get((question, norm(t))) is RelevanceVerdict.RELEVANT
            ]
            if site is PromptSite.RELEVANCE_SINGLE:
                return "Relevant" if hits else "Irrelevant"
            if not hits:
                return "No."
            return "Relevant paragraphs:\n" + "\n".join(f"[{i}] {t}" for i, t in hits)
        if site is PromptSite.ANSWER_DIRECT:
            return self._lookup(question, DIRECT_CONTEXT)
        if site is PromptSite.ANSWER_WITH_PASSAGES:
            texts = parse_passages_block(slots["passages"])
            exact = b.answers.get((question, passages_fingerprint(texts)))
            if exact is not None:
                return exact
            for t in texts:
                hit = b.evidence.get((question, norm(t)))
                if hit is not None:
                    return hit
            return self._lookup(question, None)
        # aggregate
        pairs = parse_subqa_block(slots["subqa"])
        exact = b.answers.get((question, subqa_fingerprint(pairs)))
        if exact is not None:
            return exact
        if pairs and all(a.strip().lower() == UNKNOWN_TEXT for _, a in pairs):
            return UNKNOWN_TEXT
        return self._lookup(question, None)

    def _lookup(self, question: str, context: str | None) -> str:
        answers = self.behavior.answers
        if context is not None and (question, context) in answers:
            return answers[(question, context)]
        return answers.get((question, ANY_CONTEXT), placeholder_answer(question))
