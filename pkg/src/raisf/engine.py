"""Recursive solver: self-knowledge gate, filtered retrieval, decomposition.

For a question at depth ``d`` the solver

1. answers "unknown" outright when ``d > d_th``;
2. asks the self-knowledge model whether the answerer can go closed-book,
   and if so answers directly;
3. retrieves ``k`` passages, keeps those the relevance model accepts, and
   answers from the kept passages only;
4. otherwise has the decomposer split the question, solves each part at
   ``d + 1`` and asks the answerer to combine the sub-answers.

Unusable sub-model output never aborts a query. An unparsable self-knowledge
reply counts as "unknow", an unparsable relevance reply keeps no passages, and
an empty completion becomes an "unknown" answer. Each such event is written
to the node's ``notes``. Only ``BackendUnavailable`` escapes :meth:`Engine.solve`.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, TypeVar

from .backends.base import ModelBackend, ModelRole
from .backends.parsing import (
    parse_decomposition,
    parse_knowledge_verdict,
    parse_relevance_batch,
    parse_relevance_single,
)
from .backends.prompts import DEFAULT_CATALOG, PromptCatalog, PromptSite
from .core import (
    Ablation,
    Answer,
    Branch,
    Decomposition,
    EngineConfig,
    KnowledgeVerdict,
    Passage,
    Question,
    RelevanceMode,
    RelevanceVerdict,
    SolveTrace,
)
from .errors import BackendRefusal, ConfigError, EmptyQuery, InvalidParams, ParseError
from .retrieval import Retriever

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class BatchResult:
    question: Question
    answer: Answer | None = None
    trace: SolveTrace | None = None
    error: str | None = None
    error_type: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def map_ordered(fn: Callable[[T], R], items: Sequence[T], parallelism: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is kept."""
    if parallelism < 1:
        raise InvalidParams("parallelism must be >= 1")
    if parallelism == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


class Engine:
    """Binds a configuration, a model backend and a retriever."""

    def __init__(self, config: EngineConfig, backend: ModelBackend, retriever: Retriever | None) -> None:
        if retriever is None and Ablation.NO_PRM not in config.ablation:
            raise ConfigError("a retriever is required unless passage relevance is ablated")
        self.config = config
        self.backend = backend
        self.retriever = retriever
        self.catalog: PromptCatalog = config.prompts or DEFAULT_CATALOG

    def with_config(self, **changes) -> Engine:
        return Engine(replace(self.config, **changes), self.backend, self.retriever)

    # -- public API ---------------------------------------------------------

    def solve(self, question: Question) -> tuple[Answer, SolveTrace]:
        trace = self._solve(question)
        return trace.answer, trace

    def solve_batch(self, questions: Sequence[Question], parallelism: int = 1) -> list[BatchResult]:
        def one(q: Question) -> BatchResult:
            try:
                answer, trace = self.solve(q)
            except Exception as exc:  # isolate each question
                logger.warning("question %s failed: %s", q.id, exc)
                return BatchResult(q, error=str(exc) or type(exc).__name__, error_type=type(exc).__name__)
            return BatchResult(q, answer, trace)

        return map_ordered(one, list(questions), parallelism)

    # -- recursion ----------------------------------------------------------

    def _solve(self, q: Question) -> SolveTrace:
        cfg = self.config
        if q.depth > cfg.d_th:
            return SolveTrace(q, Branch.DEPTH_EXCEEDED, Answer.unknown())

        notes: list[str] = []
        verdict = None
        if Ablation.NO_SKM not in cfg.ablation:
            verdict = self._probe_knowledge(q, notes)
            if verdict is KnowledgeVerdict.KNOW:
                answer = self._answer(q, PromptSite.ANSWER_DIRECT, notes)
                return SolveTrace(q, Branch.SELF_KNOWLEDGE, answer, knowledge_verdict=verdict, notes=tuple(notes))

        retrieved: tuple[Passage, ...] = ()
        relevant: frozenset[int] = frozenset()
        calls = 0
        if Ablation.NO_PRM not in cfg.ablation:
            calls = 1
            retrieved = self._retrieve(q, notes)
            relevant = self._judge_relevance(q, retrieved, notes)
            if relevant:
                context = retrieved if cfg.answer_with_all_retrieved else [retrieved[i] for i in sorted(relevant)]
                answer = self._answer(q, PromptSite.ANSWER_WITH_PASSAGES, notes, passages=context)
                return SolveTrace(
                    q, Branch.RETRIEVAL_ANSWER, answer,
                    knowledge_verdict=verdict, retrieved=retrieved, relevant_indices=relevant,
                    retrieval_calls=calls, notes=tuple(notes),
                )

        def unresolved(reason: str) -> SolveTrace:
            notes.append(reason)
            return SolveTrace(
                q, Branch.DEPTH_EXCEEDED, Answer.unknown(),
                knowledge_verdict=verdict, retrieved=retrieved, retrieval_calls=calls, notes=tuple(notes),
            )

        if Ablation.NO_QDM in cfg.ablation:
            return unresolved("decomposition disabled; no relevant passages")
        decomposition, dropped = self._decompose(q, notes)
        if decomposition is None:
            return unresolved("no sub-questions; cannot proceed")

        children = tuple(self._solve(q.child(i, text)) for i, text in enumerate(decomposition.sub_questions, 1))
        subqa = [(c.question.text, c.answer.text) for c in children]
        answer = self._answer(q, PromptSite.AGGREGATE, notes, subqa=subqa)
        return SolveTrace(
            q, Branch.DECOMPOSED, answer,
            knowledge_verdict=verdict, retrieved=retrieved, decomposition=decomposition, children=children,
            retrieval_calls=calls + sum(c.retrieval_calls for c in children),
            node_count=1 + sum(c.node_count for c in children),
            dropped_subquestions=dropped, notes=tuple(notes),
        )

    # -- steps --------------------------------------------------------------

    def _call(self, role: ModelRole, prompt: str) -> str:
        return self.backend.complete(role, prompt, self.config.decoding)

    def _probe_knowledge(self, q: Question, notes: list[str]) -> KnowledgeVerdict:
        prompt = self.catalog.render(PromptSite.KNOW_PROBE, q.text)
        try:
            return parse_knowledge_verdict(self._call(ModelRole.SELF_KNOWLEDGE, prompt))
        except (ParseError, BackendRefusal) as exc:
            notes.append(f"self-knowledge: {type(exc).__name__}: {exc}; treated as unknow")
            return KnowledgeVerdict.UNKNOW

    def _retrieve(self, q: Question, notes: list[str]) -> tuple[Passage, ...]:
        try:
            found = self.retriever.retrieve(q.text, self.config.k_passages, self.config.retrieval_length)
        except EmptyQuery as exc:
            notes.append(f"retrieval: {exc}")
            return ()
        return tuple(found)

    def _judge_relevance(self, q: Question, passages: Sequence[Passage], notes: list[str]) -> frozenset[int]:
        if not passages:
            return frozenset()
        words = self.config.retrieval_length
        if self.config.relevance_mode is RelevanceMode.BATCH:
            prompt = self.catalog.render(PromptSite.RELEVANCE_PROBE, q.text, passages, max_words=words)
            try:
                return frozenset(parse_relevance_batch(self._call(ModelRole.RELEVANCE, prompt), len(passages)))
            except (ParseError, BackendRefusal) as exc:
                notes.append(f"relevance: {type(exc).__name__}: {exc}; all passages treated as irrelevant")
                return frozenset()
        keep = set()
        for i, passage in enumerate(passages):
            prompt = self.catalog.render(PromptSite.RELEVANCE_SINGLE, q.text, [passage], max_words=words)
            try:
                verdict = parse_relevance_single(self._call(ModelRole.RELEVANCE, prompt))
            except (ParseError, BackendRefusal) as exc:
                notes.append(f"relevance[{i + 1}]: {type(exc).__name__}: {exc}; treated as irrelevant")
                continue
            if verdict is RelevanceVerdict.RELEVANT:
                keep.add(i)
        return frozenset(keep)

    def _decompose(self, q: Question, notes: list[str]) -> tuple[Decomposition | None, int]:
        prompt = self.catalog.render(PromptSite.DECOMPOSE, q.text)
        try:
            decomposition = parse_decomposition(self._call(ModelRole.DECOMPOSER, prompt))
        except (ParseError, BackendRefusal) as exc:
            notes.append(f"decomposition: {type(exc).__name__}: {exc}")
            return None, 0
        subs = decomposition.sub_questions
        cap = self.config.max_fanout
        if len(subs) <= cap:
            return decomposition, 0
        notes.append(f"decomposition: kept first {cap} of {len(subs)} sub-questions")
        return Decomposition(subs[:cap]), len(subs) - cap

    def _answer(
        self,
        q: Question,
        site: PromptSite,
        notes: list[str],
        passages: Sequence[Passage] | None = None,
        subqa: Sequence[tuple[str, str]] | None = None,
    ) -> Answer:
        prompt = self.catalog.render(site, q.text, passages, subqa, max_words=self.config.retrieval_length)
        try:
            return Answer.from_model(self._call(ModelRole.ANSWERER, prompt))
        except BackendRefusal as exc:
            notes.append(f"answer: {exc}; recorded as unknown")
            return Answer.unknown()


def solve(engine: Engine, question: Question) -> tuple[Answer, SolveTrace]:
    return engine.solve(question)


def solve_batch(engine: Engine, questions: Sequence[Question], parallelism: int = 1) -> list[BatchResult]:
    return engine.solve_batch(questions, parallelism)


def max_retrievals_bound(d_th: int, fanout: int) -> int:
    """Retriever calls in a full tree of branching ``fanout`` searched to depth ``d_th``."""
    if d_th < 0 or fanout < 1:
        raise InvalidParams("need d_th >= 0 and fanout >= 1")
    if fanout == 1:
        return d_th + 1
    return (fanout ** (d_th + 1) - 1) // (fanout - 1)
