"""Synthetic fact worlds for offline trend experiments.

An oracle world is a set of atomic facts ("The motto of Vakor Menit is
Ostrelu.") and composite questions over one to ``max_facts`` of them. Each
fact is independently

* known to the model with probability ``p_know``;
* present in the corpus with probability ``p_corpus``;
* shadowed by ``D`` distractor passages that mention its subject and relation
  more often than the true passage does but never state the answer. ``D`` is
  geometric: ``P(D >= d + 1 | D >= d) = distractor_decay``, capped at
  ``max_distractors``. The true passage therefore ranks ``D + 1`` for its own
  question, and a top-``k`` retrieval finds it only when ``D < k``.

The scripted model is perfectly calibrated. It claims to know a question
exactly when it knows every fact behind it, accepts a passage only if it is
the true passage of an atomic question, and decomposes a composite over facts
``f1..fm`` into ``f1`` plus the composite over ``f2..fm``. A composite is
answered correctly only when every sub-answer is.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..backends.scripted import DIRECT_CONTEXT, ScriptedBehavior, subqa_fingerprint
from ..core import KnowledgeVerdict, QARecord, RelevanceVerdict
from ..errors import InvalidParams
from ..retrieval import Corpus, Document

RELATIONS = (
    "anthem", "architect", "chronicler", "currency", "emblem", "festival", "founder", "guardian",
    "harbor", "language", "mascot", "mentor", "motto", "patron", "rival", "river", "successor",
    "treasurer", "garrison", "orchard",
)
_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr", "dr", "sk")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ou")
_CODAS = ("", "n", "r", "s", "th", "l", "x", "m")


@dataclass(frozen=True)
class OracleWorldParams:
    num_composites: int = 1000
    max_facts: int = 3
    p_know: float = 0.3
    p_corpus: float = 0.5
    distractor_decay: float = 0.65
    max_distractors: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_composites < 1:
            raise InvalidParams("need at least one composite question")
        if self.max_facts < 1:
            raise InvalidParams("max_facts must be >= 1")
        for name in ("p_know", "p_corpus", "distractor_decay"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParams(f"{name} must lie in [0, 1]")
        if self.max_distractors < 0:
            raise InvalidParams("max_distractors must be >= 0")


@dataclass(frozen=True)
class Fact:
    id: str
    entity: str
    relation: str
    answer: str
    known: bool
    in_corpus: bool
    distractors: int

    @property
    def question(self) -> str:
        return f"What is the {self.relation} of {self.entity}?"

    @property
    def passage(self) -> str:
        return f"The {self.relation} of {self.entity} is {self.answer}."


@dataclass(frozen=True)
class CompositeQuestion:
    id: str
    fact_ids: tuple[str, ...]


@dataclass
class OracleWorld:
    params: OracleWorldParams
    facts: dict[str, Fact]
    composites: list[CompositeQuestion]
    corpus: Corpus
    behavior: ScriptedBehavior
    dataset: list[QARecord] = field(default_factory=list)


def composite_text(facts: list[Fact]) -> str:
    if len(facts) == 1:
        return facts[0].question
    parts = [f"the {f.relation} of {f.entity}" for f in facts]
    return f"What are {', '.join(parts[:-1])} and {parts[-1]}?"


def composite_answer(facts: list[Fact]) -> str:
    return " and ".join(f.answer for f in facts)


_FILLER = (
    "The regional archive keeps ledgers, maps and letters of many houses and towns.",
    "Each record of the old guilds lists a patron, a motto and a treasurer.",
    "Scholars of the coastal towns describe every harbor, river and festival in turn.",
)


def _distractor_text(fact: Fact, n: int) -> str:
    e, r = fact.entity, fact.relation
    return f"Archive note {n}: the {r} of {e} is disputed; {e} {r} records of {e} are lost."


class _Names:
    """Unique pseudo-words; none collide with each other or with English glue words."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.used: set[str] = set(RELATIONS) | {"unknown", "the", "and", "what", "archive", "note"}

    def word(self, syllables: int) -> str:
        while True:
            w = "".join(
                self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) + self.rng.choice(_CODAS)
                for _ in range(syllables)
            )
            if w not in self.used:
                self.used.add(w)
                return w.capitalize()


def build_oracle_world(params: OracleWorldParams) -> OracleWorld:
    rng = random.Random(params.seed)
    names = _Names(rng)
    facts: dict[str, Fact] = {}
    composites: list[CompositeQuestion] = []

    for c in range(params.num_composites):
        m = rng.randint(1, params.max_facts)
        ids = []
        for _ in range(m):
            d = 0
            while d < params.max_distractors and rng.random() < params.distractor_decay:
                d += 1
            fact = Fact(
                id=f"f{len(facts):05d}",
                entity=f"{names.word(2)} {names.word(2)}",
                relation=rng.choice(RELATIONS),
                answer=names.word(3),
                known=rng.random() < params.p_know,
                in_corpus=rng.random() < params.p_corpus,
                distractors=d,
            )
            facts[fact.id] = fact
            ids.append(fact.id)
        composites.append(CompositeQuestion(f"c{c:05d}", tuple(ids)))

    docs = []
    know: dict[str, KnowledgeVerdict] = {}
    answers: dict[tuple[str, str], str] = {}
    relevance: dict[tuple[str, str], RelevanceVerdict] = {}
    evidence: dict[tuple[str, str], str] = {}
    decompositions: dict[str, tuple[str, ...]] = {}

    for fact in facts.values():
        if fact.in_corpus:
            docs.append(Document(fact.id, fact.passage))
            relevance[(fact.question, fact.passage)] = RelevanceVerdict.RELEVANT
            evidence[(fact.question, fact.passage)] = fact.answer
        for n in range(fact.distractors):
            docs.append(Document(f"{fact.id}-d{n}", _distractor_text(fact, n)))

    def register(group: list[Fact]) -> None:
        """Script every question on the decomposition path of ``group``."""
        text = composite_text(group)
        if all(f.known for f in group):
            know[text] = KnowledgeVerdict.KNOW
            answers[(text, DIRECT_CONTEXT)] = composite_answer(group)
        if len(group) == 1:
            return
        head, tail = group[0], group[1:]
        decompositions[text] = (head.question, composite_text(tail))
        pairs = [(head.question, head.answer), (composite_text(tail), composite_answer(tail))]
        answers[(text, subqa_fingerprint(pairs))] = composite_answer(group)
        register([head])
        register(tail)

    dataset = []
    for comp in composites:
        group = [facts[i] for i in comp.fact_ids]
        register(group)
        dataset.append(QARecord(comp.id, composite_text(group), (composite_answer(group),)))

    for n, text in enumerate(_FILLER):
        docs.append(Document(f"filler-{n}", text))
    rng.shuffle(docs)
    behavior = ScriptedBehavior(
        know=know,
        answers=answers,
        relevance=relevance,
        decompositions=decompositions,
        evidence=evidence,
        default_verdict=KnowledgeVerdict.UNKNOW,
    )
    return OracleWorld(params, facts, composites, Corpus(tuple(docs)), behavior, dataset)


def generate_oracle_world(params: OracleWorldParams) -> tuple[Corpus, ScriptedBehavior, list[QARecord]]:
    world = build_oracle_world(params)
    return world.corpus, world.behavior, world.dataset
