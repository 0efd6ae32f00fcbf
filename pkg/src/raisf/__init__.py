"""Retrieval-augmented question answering with iterative self-feedback.

A question is first put to a self-knowledge probe, then to filtered passage
retrieval, and finally split into sub-questions that are solved the same way.
"""

from .core import (
    Ablation,
    Answer,
    AnswerKind,
    Branch,
    DecodingSettings,
    Decomposition,
    EngineConfig,
    KnowledgeVerdict,
    Passage,
    QARecord,
    Question,
    RelevanceMode,
    RelevanceVerdict,
    SolveTrace,
    new_root_question,
    trace_from_json,
    trace_to_json,
    validate_trace,
)
from .engine import BatchResult, Engine, max_retrievals_bound, solve, solve_batch
from .retrieval import Corpus, Document, PassageIndex, build_index, chunk_document, retrieve

__version__ = "0.1.0"

__all__ = [
    "Ablation",
    "Answer",
    "AnswerKind",
    "BatchResult",
    "Branch",
    "Corpus",
    "DecodingSettings",
    "Decomposition",
    "Document",
    "Engine",
    "EngineConfig",
    "KnowledgeVerdict",
    "Passage",
    "PassageIndex",
    "QARecord",
    "Question",
    "RelevanceMode",
    "RelevanceVerdict",
    "SolveTrace",
    "build_index",
    "chunk_document",
    "max_retrievals_bound",
    "new_root_question",
    "retrieve",
    "solve",
    "solve_batch",
    "trace_from_json",
    "trace_to_json",
    "validate_trace",
]
