"""Prompt templates for every model call site, and their inverse.

Templates are ``str.format`` strings over a fixed set of placeholders:
``{question}``, ``{passages}``, ``{subqa}`` and ``{num_passages}``. The same
template can be turned back into a regular expression, which is how the
scripted backend reads the question and context out of a rendered prompt.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import cached_property
from typing import Mapping, Sequence

from ..core import Passage
from ..errors import ConfigError, MissingTemplateInput


class PromptSite(str, Enum):
    KNOW_PROBE = "know_probe"
    ANSWER_DIRECT = "answer_direct"
    ANSWER_WITH_PASSAGES = "answer_with_passages"
    RELEVANCE_PROBE = "relevance_probe"
    RELEVANCE_SINGLE = "relevance_single"
    DECOMPOSE = "decompose"
    AGGREGATE = "aggregate"


PLACEHOLDERS = frozenset({"question", "passages", "subqa", "num_passages"})

_NEEDS_PASSAGES = {PromptSite.ANSWER_WITH_PASSAGES, PromptSite.RELEVANCE_PROBE, PromptSite.RELEVANCE_SINGLE}
_NEEDS_SUBQA = {PromptSite.AGGREGATE}

KNOW_INSTRUCTION = (
    "Can you use your own knowledge base to solve this problem? Answer yes if you know, "
    "no if you need additional knowledge base to solve it."
)
DIRECT_INSTRUCTION = "Give the answer to the question."
PASSAGE_INSTRUCTION = "Using the knowledge from the relevant paragraphs, give the answer to the question."
RELEVANCE_INSTRUCTION = (
    "I will provide you with {num_passages} additional pieces of knowledge based on the search for "
    "this question. Please assess whether these {num_passages} paragraphs are relevant to the question "
    'and sufficient to answer it. If they are, please tell me what the relevant paragraphs are; if not, '
    'please answer "No."'
)
RELEVANCE_SINGLE_INSTRUCTION = (
    "Is the following paragraph relevant to the question and sufficient to answer it? "
    "Answer relevant or irrelevant."
)
DECOMPOSE_INSTRUCTION = "Please break down this question into several sub-questions and list them"
AGGREGATE_INSTRUCTION = "Based on the sub-question answer, give the answer to the original question."

FEW_SHOT_SEPARATOR = "\n---\n"

_NUMBER_WORDS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"]


def number_word(n: int) -> str:
    return _NUMBER_WORDS[n] if 0 <= n < len(_NUMBER_WORDS) else str(n)


def truncate_words(text: str, max_words: int | None) -> str:
    words = text.split()
    if max_words is not None:
        words = words[:max_words]
    return " ".join(words)


def render_passages(passages: Sequence[Passage | str], max_words: int | None = None) -> str:
    lines = []
    for i, p in enumerate(passages, 1):
        text = p.text if isinstance(p, Passage) else p
        lines.append(f"[{i}] {truncate_words(text, max_words)}")
    return "\n".join(lines)


def render_subqa(pairs: Sequence[tuple[str, str]]) -> str:
    return "\n".join(
        f"{i}. Q: {' '.join(q.split())}\n   Answer: {' '.join(a.split())}" for i, (q, a) in enumerate(pairs, 1)
    )


_PASSAGE_LINE = re.compile(r"^\[(\d+)\] ?(.*)$", re.MULTILINE)
_SUBQA_ITEM = re.compile(r"^\d+\. Q: (.*)\n   Answer: (.*)$", re.MULTILINE)


def parse_passages_block(block: str) -> list[str]:
    """Inverse of :func:`render_passages` (texts in listed order)."""
    return [m.group(2) for m in _PASSAGE_LINE.finditer(block)]


def parse_subqa_block(block: str) -> list[tuple[str, str]]:
    return [(m.group(1), m.group(2)) for m in _SUBQA_ITEM.finditer(block)]


@dataclass(frozen=True)
class Exemplar:
    question: str
    output: str
    passage: str | None = None


DEFAULT_EXEMPLARS: dict[PromptSite, tuple[Exemplar, ...]] = {
    PromptSite.KNOW_PROBE: (
        Exemplar("What is the capital city of France?", "Yes."),
        Exemplar("How many visitors attended the 1923 county fair in Tartu?", "No."),
    ),
    PromptSite.ANSWER_DIRECT: (
        Exemplar("What is the capital city of France?", "Paris"),
        Exemplar("Who wrote the play Hamlet?", "William Shakespeare"),
    ),
    PromptSite.RELEVANCE_SINGLE: (
        Exemplar(
            "Who painted the Mona Lisa?",
            "Relevant",
            passage="The Mona Lisa is a half-length portrait painted by Leonardo da Vinci.",
        ),
        Exemplar(
            "Who painted the Mona Lisa?",
            "Irrelevant",
            passage="The Louvre is the most-visited art museum in the world.",
        ),
    ),
    PromptSite.DECOMPOSE: (
        Exemplar(
            "Was the author of Hamlet born before the Spanish Armada sailed?",
            "1. Who wrote Hamlet?\n2. When was William Shakespeare born?\n3. When did the Spanish Armada sail?",
        ),
        Exemplar(
            "Is the capital of Australia larger than the capital of New Zealand?",
            "1. What is the capital of Australia?\n2. What is the capital of New Zealand?\n"
            "3. What are the populations of Canberra and Wellington?",
        ),
    ),
}


@dataclass(frozen=True)
class PromptCatalog:
    """One template per call site. Defaults carry the instructions verbatim."""

    know_probe: str = KNOW_INSTRUCTION + "\n\nThe problem is: {question}"
    answer_direct: str = DIRECT_INSTRUCTION + "\n\nThe problem is: {question}"
    answer_with_passages: str = PASSAGE_INSTRUCTION + "\n\n{passages}\n\nThe problem is: {question}"
    relevance_probe: str = RELEVANCE_INSTRUCTION + "\n\nThe problem is: {question}\n\n{passages}"
    relevance_single: str = RELEVANCE_SINGLE_INSTRUCTION + "\n\nThe problem is: {question}\n\n{passages}"
    decompose: str = DECOMPOSE_INSTRUCTION + ".\n\nThe problem is: {question}"
    aggregate: str = AGGREGATE_INSTRUCTION + "\n\n{subqa}\n\nThe original question is: {question}"
    exemplars: Mapping[PromptSite, tuple[Exemplar, ...]] = field(
        default_factory=lambda: dict(DEFAULT_EXEMPLARS), compare=False, hash=False
    )

    def __post_init__(self) -> None:
        for site in PromptSite:
            names = _field_names(self.template(site))
            unknown = names - PLACEHOLDERS
            if unknown:
                raise ConfigError(f"template {site.value!r} uses unknown placeholders {sorted(unknown)}")
            if "question" not in names:
                raise ConfigError(f"template {site.value!r} must contain {{question}}")

    def template(self, site: PromptSite | str) -> str:
        return getattr(self, PromptSite(site).value)

    def with_overrides(self, overrides: Mapping[str, str]) -> PromptCatalog:
        valid = {f.name for f in fields(self)} - {"exemplars"}
        bad = set(overrides) - valid
        if bad:
            raise ConfigError(f"unknown prompt sites {sorted(bad)}")
        return replace(self, **overrides)

    def render(
        self,
        site: PromptSite | str,
        question: str,
        passages: Sequence[Passage | str] | None = None,
        subqa: Sequence[tuple[str, str]] | None = None,
        *,
        max_words: int | None = None,
        few_shot: bool = False,
    ) -> str:
        site = PromptSite(site)
        if site in _NEEDS_PASSAGES and not passages:
            raise MissingTemplateInput(f"{site.value} needs passages")
        if site in _NEEDS_SUBQA and not subqa:
            raise MissingTemplateInput(f"{site.value} needs sub-question answers")
        values: dict[str, str] = {"question": " ".join(question.split())}
        if passages:
            values["passages"] = render_passages(passages, max_words)
            values["num_passages"] = number_word(len(passages))
        if subqa:
            values["subqa"] = render_subqa(subqa)
        template = self.template(site)
        missing = _field_names(template) - values.keys()
        if missing:
            raise MissingTemplateInput(f"{site.value} template needs {sorted(missing)}")
        body = template.format(**values)
        if few_shot and self.exemplars.get(site):
            return self._exemplar_block(site) + FEW_SHOT_SEPARATOR + body
        return body

    def _exemplar_block(self, site: PromptSite) -> str:
        blocks = []
        for ex in self.exemplars[site]:
            shown = self.render(site, ex.question, passages=[ex.passage] if ex.passage else None)
            blocks.append(f"Example:\n{shown}\nOutput: {ex.output}")
        return "\n\n".join(blocks)

    @cached_property
    def _patterns(self) -> dict[PromptSite, re.Pattern[str]]:
        return {site: _template_regex(self.template(site)) for site in PromptSite}

    def match(self, site: PromptSite | str, prompt: str) -> dict[str, str] | None:
        """Recover placeholder values from a prompt rendered for ``site``."""
        if FEW_SHOT_SEPARATOR in prompt:
            prompt = prompt.rsplit(FEW_SHOT_SEPARATOR, 1)[1]
        m = self._patterns[PromptSite(site)].fullmatch(prompt)
        return m.groupdict() if m else None


def render_prompt(
    site: PromptSite | str,
    question: str,
    passages: Sequence[Passage | str] | None = None,
    subqa: Sequence[tuple[str, str]] | None = None,
    *,
    max_words: int | None = 64,
    catalog: PromptCatalog | None = None,
) -> str:
    return (catalog or DEFAULT_CATALOG).render(site, question, passages, subqa, max_words=max_words)


def _field_names(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name is not None}


def _template_regex(template: str) -> re.Pattern[str]:
    parts: list[str] = []
    seen: set[str] = set()
    for literal, name, _, _ in string.Formatter().parse(template):
        parts.append(re.escape(literal))
        if name is None:
            continue
        if name in seen:
            parts.append(f"(?P={name})")
        else:
            parts.append(f"(?P<{name}>.*?)")
            seen.add(name)
    return re.compile("".join(parts), re.DOTALL)


DEFAULT_CATALOG = PromptCatalog()
