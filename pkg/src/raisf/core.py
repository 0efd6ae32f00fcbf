"""Domain types, the solve-trace tree and engine configuration.

Everything here is immutable after construction so traces and configs can be
shared freely between threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Iterator

from .errors import EmptyQuestion, InvalidParams

if TYPE_CHECKING:
    from .backends.prompts import PromptCatalog

UNKNOWN_TEXT = "unknown"
TRACE_SCHEMA = "raisf.trace"
TRACE_SCHEMA_VERSION = 1


class AnswerKind(str, Enum):
    ANSWERED = "answered"
    UNKNOWN = "unknown"


class KnowledgeVerdict(str, Enum):
    KNOW = "know"
    UNKNOW = "unknow"


class RelevanceVerdict(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"


class Branch(str, Enum):
    SELF_KNOWLEDGE = "self_knowledge"
    RETRIEVAL_ANSWER = "retrieval_answer"
    DECOMPOSED = "decomposed"
    DEPTH_EXCEEDED = "depth_exceeded"


class Ablation(str, Enum):
    NO_SKM = "no-skm"
    NO_PRM = "no-prm"
    NO_QDM = "no-qdm"


class RelevanceMode(str, Enum):
    BATCH = "batch"
    PER_PASSAGE = "per_passage"


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    depth: int = 0

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise EmptyQuestion("question text is empty")
        if self.depth < 0:
            raise ValueError(f"negative depth {self.depth}")

    def child(self, index: int, text: str) -> Question:
        """Sub-question ``index`` (1-based) one level below this one."""
        return Question(f"{self.id}.{index}", text.strip(), self.depth + 1)


def new_root_question(text: str, ordinal: int = 0) -> Question:
    """Build a depth-0 question whose id depends only on its text and ``ordinal``."""
    stripped = text.strip()
    if not stripped:
        raise EmptyQuestion("question text is empty")
    digest = hashlib.sha1(stripped.encode("utf-8")).hexdigest()[:12]
    return Question(f"q{digest}-{ordinal}", stripped, 0)


@dataclass(frozen=True)
class Answer:
    text: str
    kind: AnswerKind = AnswerKind.ANSWERED

    def __post_init__(self) -> None:
        if self.kind is AnswerKind.UNKNOWN and self.text != UNKNOWN_TEXT:
            raise ValueError(f"unknown answers must read {UNKNOWN_TEXT!r}")
        if self.kind is AnswerKind.ANSWERED and not self.text.strip():
            raise ValueError("answered text is empty")

    @classmethod
    def unknown(cls) -> Answer:
        return cls(UNKNOWN_TEXT, AnswerKind.UNKNOWN)

    @classmethod
    def from_model(cls, raw: str) -> Answer:
        """Wrap raw model text; a bare "unknown" (or nothing) becomes Unknown."""
        text = raw.strip()
        if not text or text.rstrip(".!").strip().lower() == UNKNOWN_TEXT:
            return cls.unknown()
        return cls(text)

    @property
    def is_unknown(self) -> bool:
        return self.kind is AnswerKind.UNKNOWN


@dataclass(frozen=True)
class Passage:
    doc_id: str
    chunk_index: int
    text: str
    score: float = 0.0

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.chunk_index)


@dataclass(frozen=True)
class Decomposition:
    sub_questions: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.sub_questions:
            raise ValueError("a decomposition needs at least one sub-question")
        if any(not q.strip() for q in self.sub_questions):
            raise ValueError("empty sub-question")

    def to_numbered_list(self) -> str:
        return "\n".join(f"{i}. {q}" for i, q in enumerate(self.sub_questions, 1))


@dataclass(frozen=True)
class DecodingSettings:
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise InvalidParams("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise InvalidParams("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class EngineConfig:
    """Knobs of the recursive solver.

    ``d_th`` is the deepest level that may still consult the sub-models; a
    question at depth ``d_th + 1`` is answered "unknown" without any calls.
    ``retrieval_length`` is the number of whitespace words of each passage that
    make it into a prompt.
    """

    d_th: int = 3
    k_passages: int = 5
    retrieval_length: int = 64
    ablation: frozenset[Ablation] = frozenset()
    relevance_mode: RelevanceMode = RelevanceMode.BATCH
    answer_with_all_retrieved: bool = False
    max_fanout: int = 8
    decoding: DecodingSettings = field(default_factory=DecodingSettings)
    prompts: PromptCatalog | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ablation", frozenset(Ablation(a) for a in self.ablation))
        object.__setattr__(self, "relevance_mode", RelevanceMode(self.relevance_mode))
        if self.d_th < 0:
            raise InvalidParams("d_th must be >= 0")
        if self.k_passages < 1:
            raise InvalidParams("k_passages must be >= 1")
        if self.retrieval_length < 1:
            raise InvalidParams("retrieval_length must be >= 1")
        if self.max_fanout < 1:
            raise InvalidParams("max_fanout must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class QARecord:
    id: str
    question: str
    gold_answers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        if not self.question.strip():
            raise EmptyQuestion(f"record {self.id!r} has an empty question")
        if not self.gold_answers or any(not a.strip() for a in self.gold_answers):
            raise ValueError(f"record {self.id!r} needs non-empty gold answers")

    def to_question(self) -> Question:
        return Question(self.id, self.question.strip(), 0)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "question": self.question, "answers": list(self.gold_answers)}


def load_qa_jsonl(path: str | Path) -> list[QARecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(QARecord(str(obj["id"]), obj["question"], tuple(obj["answers"])))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad QA record ({exc})") from exc
    return records


def write_qa_jsonl(records: Iterable[QARecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Solve trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolveTrace:
    """One node of the recursion tree, with its subtree.

    ``notes`` records degraded sub-model outputs (unparsable verdicts, empty
    completions, truncated decompositions) so that nothing is silently lost.
    """

    question: Question
    branch: Branch
    answer: Answer
    knowledge_verdict: KnowledgeVerdict | None = None
    retrieved: tuple[Passage, ...] = ()
    relevant_indices: frozenset[int] = frozenset()
    decomposition: Decomposition | None = None
    children: tuple[SolveTrace, ...] = ()
    retrieval_calls: int = 0
    node_count: int = 1
    dropped_subquestions: int = 0
    notes: tuple[str, ...] = ()

    def iter_nodes(self) -> Iterator[SolveTrace]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def tree_depth(self) -> int:
        """Number of edges on the longest root-to-leaf path."""
        if not self.children:
            return 0
        return 1 + max(c.tree_depth() for c in self.children)

    def max_fanout(self) -> int:
        return max(len(n.children) for n in self.iter_nodes())

    @property
    def invoked_retriever(self) -> bool:
        return self.retrieval_calls - sum(c.retrieval_calls for c in self.children) == 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "question": {"id": self.question.id, "text": self.question.text, "depth": self.question.depth},
            "branch": self.branch.value,
            "answer": {"text": self.answer.text, "kind": self.answer.kind.value},
            "knowledge_verdict": self.knowledge_verdict.value if self.knowledge_verdict else None,
            "retrieved": [
                {"doc_id": p.doc_id, "chunk_index": p.chunk_index, "text": p.text, "score": p.score}
                for p in self.retrieved
            ],
            "relevant_indices": sorted(self.relevant_indices),
            "decomposition": list(self.decomposition.sub_questions) if self.decomposition else None,
            "children": [c.to_dict() for c in self.children],
            "retrieval_calls": self.retrieval_calls,
            "node_count": self.node_count,
            "dropped_subquestions": self.dropped_subquestions,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SolveTrace:
        q = data["question"]
        verdict = data.get("knowledge_verdict")
        decomposition = data.get("decomposition")
        return cls(
            question=Question(q["id"], q["text"], q["depth"]),
            branch=Branch(data["branch"]),
            answer=Answer(data["answer"]["text"], AnswerKind(data["answer"]["kind"])),
            knowledge_verdict=KnowledgeVerdict(verdict) if verdict else None,
            retrieved=tuple(
                Passage(p["doc_id"], p["chunk_index"], p["text"], p["score"]) for p in data["retrieved"]
            ),
            relevant_indices=frozenset(data["relevant_indices"]),
            decomposition=Decomposition(tuple(decomposition)) if decomposition else None,
            children=tuple(cls.from_dict(c) for c in data["children"]),
            retrieval_calls=data["retrieval_calls"],
            node_count=data["node_count"],
            dropped_subquestions=data.get("dropped_subquestions", 0),
            notes=tuple(data.get("notes", ())),
        )


def trace_to_json(trace: SolveTrace, indent: int | None = 2) -> str:
    doc = {"schema": TRACE_SCHEMA, "version": TRACE_SCHEMA_VERSION, "trace": trace.to_dict()}
    return json.dumps(doc, ensure_ascii=False, indent=indent, sort_keys=True)


def trace_from_json(text: str) -> SolveTrace:
    doc = json.loads(text)
    if doc.get("schema") != TRACE_SCHEMA or doc.get("version") != TRACE_SCHEMA_VERSION:
        raise ValueError(f"not a {TRACE_SCHEMA} v{TRACE_SCHEMA_VERSION} document")
    return SolveTrace.from_dict(doc["trace"])


def validate_trace(trace: SolveTrace, d_th: int | None = None) -> list[str]:
    """Walk the tree and return a description of every broken invariant.

    With ``d_th`` given, also checks the depth gate: only nodes at depth
    ``<= d_th`` may consult a sub-model, so the tree is at most ``d_th + 1``
    edges deep and every node below ``d_th`` is a gated leaf.
    """
    problems: list[str] = []
    for node in trace.iter_nodes():
        where = f"node {node.question.id}"
        if node.branch is Branch.SELF_KNOWLEDGE and (node.retrieved or node.children):
            problems.append(f"{where}: self-knowledge node retrieved or has children")
        if node.branch is Branch.RETRIEVAL_ANSWER:
            if not node.relevant_indices:
                problems.append(f"{where}: retrieval answer without relevant passages")
            if any(not 0 <= i < len(node.retrieved) for i in node.relevant_indices):
                problems.append(f"{where}: relevant index out of range")
        if node.branch is Branch.DECOMPOSED:
            if node.decomposition is None or len(node.children) != len(node.decomposition.sub_questions):
                problems.append(f"{where}: children do not match decomposition")
            else:
                texts = tuple(c.question.text for c in node.children)
                if texts != node.decomposition.sub_questions:
                    problems.append(f"{where}: children out of decomposition order")
        elif node.children:
            problems.append(f"{where}: {node.branch.value} node has children")
        if node.branch is Branch.DEPTH_EXCEEDED and not node.answer.is_unknown:
            problems.append(f"{where}: gated node has a non-unknown answer")
        for child in node.children:
            if child.question.depth != node.question.depth + 1:
                problems.append(f"{where}: child {child.question.id} has wrong depth")
        own = node.retrieval_calls - sum(c.retrieval_calls for c in node.children)
        if own not in (0, 1):
            problems.append(f"{where}: retrieval_calls {node.retrieval_calls} inconsistent with children")
        if own == 0 and node.retrieved:
            problems.append(f"{where}: passages recorded without a retrieval call")
        if node.node_count != 1 + sum(c.node_count for c in node.children):
            problems.append(f"{where}: node_count {node.node_count} inconsistent with children")
        if d_th is not None and node.question.depth > d_th:
            if node.branch is not Branch.DEPTH_EXCEEDED or node.retrieval_calls or node.knowledge_verdict:
                problems.append(f"{where}: depth {node.question.depth} > d_th {d_th} but not gated")
    if d_th is not None and trace.question.depth + trace.tree_depth() > d_th + 1:
        problems.append(f"tree depth {trace.tree_depth()} exceeds d_th + 1 = {d_th + 1}")
    return problems
