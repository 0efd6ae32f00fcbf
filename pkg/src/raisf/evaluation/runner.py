from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

from ..backends.base import ModelRole
from ..backends.prompts import PromptSite
from ..core import Answer, QARecord
from ..engine import Engine, map_ordered
from ..errors import BackendRefusal, EmptyQuery, InvalidParams
from .metrics import exact_match

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "raisf.report"
REPORT_VERSION = 1


class Strategy(str, Enum):
    RA_ISF = "ra-isf"
    DIRECT = "direct"
    RAG = "rag"


@dataclass(frozen=True)
class QuestionResult:
    id: str
    answer: str
    correct: bool
    retrieval_calls: int
    node_count: int
    branch: str | None = None
    error: str | None = None
    error_type: str | None = None


@dataclass(frozen=True)
class EvalReport:
    strategy: str
    dataset: str
    num_questions: int
    em: float
    avg_retrievals: float
    avg_nodes: float
    per_question: tuple[QuestionResult, ...] = field(default_factory=tuple)

    @classmethod
    def from_rows(cls, strategy: str, dataset: str, rows: Sequence[QuestionResult]) -> EvalReport:
        n = len(rows)
        if not n:
            raise InvalidParams("cannot report on zero questions")
        return cls(
            strategy=strategy,
            dataset=dataset,
            num_questions=n,
            em=sum(r.correct for r in rows) / n,
            avg_retrievals=sum(r.retrieval_calls for r in rows) / n,
            avg_nodes=sum(r.node_count for r in rows) / n,
            per_question=tuple(rows),
        )

    @property
    def errors(self) -> list[QuestionResult]:
        return [r for r in self.per_question if r.error is not None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "version": REPORT_VERSION,
            "strategy": self.strategy,
            "dataset": self.dataset,
            "num_questions": self.num_questions,
            "em": self.em,
            "avg_retrievals": self.avg_retrievals,
            "avg_nodes": self.avg_nodes,
            "per_question": [r.__dict__ for r in self.per_question],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EvalReport:
        return cls(
            strategy=data["strategy"],
            dataset=data["dataset"],
            num_questions=data["num_questions"],
            em=data["em"],
            avg_retrievals=data["avg_retrievals"],
            avg_nodes=data["avg_nodes"],
            per_question=tuple(QuestionResult(**r) for r in data["per_question"]),
        )

    def to_text(self) -> str:
        head = (
            f"strategy={self.strategy} dataset={self.dataset} n={self.num_questions} "
            f"EM={100 * self.em:.1f} Ret={self.avg_retrievals:.2f} Sub={self.avg_nodes:.2f}"
        )
        lines = [head, f"{'id':<16} {'ok':<3} {'ret':>4} {'sub':>4}  answer"]
        for r in self.per_question:
            shown = r.answer if r.error is None else f"ERROR {r.error_type}: {r.error}"
            lines.append(f"{r.id[:16]:<16} {'y' if r.correct else 'n':<3} {r.retrieval_calls:>4} {r.node_count:>4}  {shown[:80]}")
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def validate_report(report: EvalReport, tol: float = 1e-12) -> list[str]:
    """Recompute the aggregates from the per-question rows."""
    rows = report.per_question
    problems = []
    if report.num_questions != len(rows):
        problems.append(f"num_questions {report.num_questions} != {len(rows)} rows")
    if rows:
        n = len(rows)
        for name, value in (
            ("em", sum(r.correct for r in rows) / n),
            ("avg_retrievals", sum(r.retrieval_calls for r in rows) / n),
            ("avg_nodes", sum(r.node_count for r in rows) / n),
        ):
            if abs(getattr(report, name) - value) > tol:
                problems.append(f"{name} {getattr(report, name)} != recomputed {value}")
    if not 0.0 <= report.em <= 1.0:
        problems.append(f"em {report.em} outside [0, 1]")
    if any(r.node_count < 1 for r in rows):
        problems.append("node_count below 1")
    return problems


def run_eval(
    engine: Engine,
    dataset: Sequence[QARecord],
    strategy: Strategy | str = Strategy.RA_ISF,
    *,
    dataset_name: str = "",
    parallelism: int = 1,
    strict_em: bool = False,
) -> EvalReport:
    """Score one strategy on ``dataset`` with Exact Match.

    ``direct`` asks the answerer closed-book; ``rag`` puts every retrieved
    passage in front of the answerer with no filtering; ``ra-isf`` runs the
    full recursive solver. A question that fails is scored incorrect and keeps
    its error message.
    """
    if not dataset:
        raise InvalidParams("dataset is empty")
    strategy = Strategy(strategy)
    records = list(dataset)

    if strategy is Strategy.RA_ISF:
        results = engine.solve_batch([r.to_question() for r in records], parallelism)
        rows = []
        for rec, res in zip(records, results):
            if res.ok:
                rows.append(QuestionResult(
                    rec.id, res.answer.text, exact_match(res.answer.text, rec.gold_answers, strict=strict_em),
                    res.trace.retrieval_calls, res.trace.node_count, branch=res.trace.branch.value,
                ))
            else:
                rows.append(QuestionResult(rec.id, "", False, 0, 1, error=res.error, error_type=res.error_type))
    else:
        def one(rec: QARecord) -> QuestionResult:
            try:
                text, calls = _single_shot(engine, rec.question, strategy)
            except Exception as exc:
                logger.warning("question %s failed: %s", rec.id, exc)
                return QuestionResult(rec.id, "", False, 0, 1, error=str(exc), error_type=type(exc).__name__)
            return QuestionResult(rec.id, text, exact_match(text, rec.gold_answers, strict=strict_em), calls, 1)

        rows = map_ordered(one, records, parallelism)
    return EvalReport.from_rows(strategy.value, dataset_name, rows)


def _single_shot(engine: Engine, question: str, strategy: Strategy) -> tuple[str, int]:
    cfg = engine.config
    catalog = engine.catalog
    passages = []
    calls = 0
    if strategy is Strategy.RAG:
        calls = 1
        try:
            passages = engine.retriever.retrieve(question, cfg.k_passages, cfg.retrieval_length)
        except EmptyQuery:
            passages = []
    if passages:
        prompt = catalog.render(PromptSite.ANSWER_WITH_PASSAGES, question, passages, max_words=cfg.retrieval_length)
    else:
        prompt = catalog.render(PromptSite.ANSWER_DIRECT, question)
    try:
        raw = engine.backend.complete(ModelRole.ANSWERER, prompt, cfg.decoding)
    except BackendRefusal:
        raw = ""
    return Answer.from_model(raw).text, calls


def sweep_dth(
    engine: Engine,
    dataset: Sequence[QARecord],
    dth_values: Sequence[int],
    *,
    strategy: Strategy | str = Strategy.RA_ISF,
    dataset_name: str = "",
    parallelism: int = 1,
) -> list[tuple[int, EvalReport]]:
    if not dth_values:
        raise InvalidParams("no d_th values")
    return [
        (d, run_eval(engine.with_config(d_th=d), dataset, strategy, dataset_name=dataset_name, parallelism=parallelism))
        for d in dth_values
    ]


def sweep_k(
    engine: Engine,
    dataset: Sequence[QARecord],
    k_values: Sequence[int],
    *,
    strategy: Strategy | str = Strategy.RA_ISF,
    dataset_name: str = "",
    parallelism: int = 1,
) -> list[tuple[int, EvalReport]]:
    if not k_values:
        raise InvalidParams("no k values")
    return [
        (k, run_eval(engine.with_config(k_passages=k), dataset, strategy, dataset_name=dataset_name, parallelism=parallelism))
        for k in k_values
    ]


def sweep_to_csv(points: Sequence[tuple[int, EvalReport]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "em", "avg_retrievals", "avg_nodes"])
    for value, report in points:
        writer.writerow([value, repr(report.em), repr(report.avg_retrievals), repr(report.avg_nodes)])
    return buf.getvalue()
