"""Training-data pipelines for the three sub-models.

Each collector asks a teacher backend for labels and emits one record per
labelled example. A record's ``input`` is the prompt the sub-model will see at
inference time, so a fine-tuned model can be dropped straight into the engine.

* ``know``: the teacher answers closed-book; the label is ``know`` when that
  answer passes the Exact Match test against gold, else ``unknow``.
* ``rel``: ``k`` passages are retrieved per question and the teacher judges
  each one on its own.
* ``decom``: the teacher splits the question; the label is the parsed list,
  renumbered.

Examples that cannot be labelled are skipped, never guessed. Every skip is
logged and, when a ``skipped`` list is passed in, appended to it.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .backends.base import ModelBackend, ModelRole
from .backends.parsing import parse_decomposition, parse_relevance_single
from .backends.prompts import DEFAULT_CATALOG, PromptCatalog, PromptSite
from .core import KnowledgeVerdict, QARecord, RelevanceVerdict
from .engine import map_ordered
from .errors import BackendError, EmptyQuery, InvalidParams, ParseError
from .evaluation.metrics import exact_match
from .retrieval import Retriever

logger = logging.getLogger(__name__)

_NUMBERED_LINE = re.compile(r"^(\d+)\. \S.*$")


class Task(str, Enum):
    KNOW = "know"
    REL = "rel"
    DECOM = "decom"


@dataclass(frozen=True)
class TrainingRecord:
    input: str
    label: str
    task: Task

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task(self.task))
        if not self.input.strip():
            raise ValueError("training input is empty")
        if self.task is Task.KNOW and self.label not in {v.value for v in KnowledgeVerdict}:
            raise ValueError(f"bad know label {self.label!r}")
        if self.task is Task.REL and self.label not in {v.value for v in RelevanceVerdict}:
            raise ValueError(f"bad rel label {self.label!r}")
        if self.task is Task.DECOM and not is_numbered_list(self.label):
            raise ValueError(f"decom label is not a numbered list: {self.label!r}")

    def to_dict(self) -> dict[str, str]:
        return {"task": self.task.value, "input": self.input, "label": self.label}


@dataclass(frozen=True)
class Skip:
    record_id: str
    task: Task
    reason: str
    count: int = 1


def is_numbered_list(text: str) -> bool:
    lines = text.split("\n")
    for n, line in enumerate(lines, 1):
        m = _NUMBERED_LINE.match(line)
        if not m or int(m.group(1)) != n:
            return False
    return bool(lines)


def sample_records(dataset: Sequence[QARecord], n: int | None, seed: int = 0) -> list[QARecord]:
    """Uniform sample of ``n`` records without replacement, kept in input order."""
    if n is None or n >= len(dataset):
        return list(dataset)
    if n < 1:
        raise InvalidParams("sample size must be >= 1")
    picked = sorted(random.Random(seed).sample(range(len(dataset)), n))
    return [dataset[i] for i in picked]


def _require(dataset: Sequence[QARecord]) -> None:
    if not dataset:
        raise InvalidParams("dataset is empty")


def _skip(out: list[Skip], skip: Skip) -> None:
    logger.warning("skipping %s example for %s: %s", skip.task.value, skip.record_id, skip.reason)
    out.append(skip)


def _gather(results: list[tuple[list[TrainingRecord], list[Skip]]], skipped: list[Skip] | None) -> list[TrainingRecord]:
    records = []
    for recs, skips in results:
        records.extend(recs)
        if skipped is not None:
            skipped.extend(skips)
    return records


def collect_know(
    dataset: Sequence[QARecord],
    teacher: ModelBackend,
    *,
    catalog: PromptCatalog = DEFAULT_CATALOG,
    parallelism: int = 1,
    skipped: list[Skip] | None = None,
) -> list[TrainingRecord]:
    _require(dataset)

    def one(rec: QARecord) -> tuple[list[TrainingRecord], list[Skip]]:
        skips: list[Skip] = []
        prompt = catalog.render(PromptSite.ANSWER_DIRECT, rec.question, few_shot=True)
        try:
            raw = teacher.complete(ModelRole.ANSWERER, prompt)
        except BackendError as exc:
            _skip(skips, Skip(rec.id, Task.KNOW, f"{type(exc).__name__}: {exc}"))
            return [], skips
        if not raw.strip():
            _skip(skips, Skip(rec.id, Task.KNOW, "empty completion"))
            return [], skips
        label = KnowledgeVerdict.KNOW if exact_match(raw, rec.gold_answers) else KnowledgeVerdict.UNKNOW
        record = TrainingRecord(catalog.render(PromptSite.KNOW_PROBE, rec.question), label.value, Task.KNOW)
        return [record], skips

    return _gather(map_ordered(one, list(dataset), parallelism), skipped)


def collect_rel(
    dataset: Sequence[QARecord],
    index: Retriever,
    teacher: ModelBackend,
    k: int,
    *,
    catalog: PromptCatalog = DEFAULT_CATALOG,
    max_words: int | None = 64,
    parallelism: int = 1,
    skipped: list[Skip] | None = None,
) -> list[TrainingRecord]:
    if k < 1:
        raise InvalidParams("k must be >= 1")
    _require(dataset)

    def one(rec: QARecord) -> tuple[list[TrainingRecord], list[Skip]]:
        skips: list[Skip] = []
        try:
            passages = index.retrieve(rec.question, k, max_words)
        except EmptyQuery:
            passages = []
        if len(passages) < k:
            _skip(skips, Skip(rec.id, Task.REL, f"retrieved {len(passages)} of {k} passages", k - len(passages)))
        records = []
        for i, passage in enumerate(passages, 1):
            query = catalog.render(PromptSite.RELEVANCE_SINGLE, rec.question, [passage], max_words=max_words, few_shot=True)
            try:
                verdict = parse_relevance_single(teacher.complete(ModelRole.RELEVANCE, query))
            except (BackendError, ParseError) as exc:
                _skip(skips, Skip(rec.id, Task.REL, f"passage {i}: {type(exc).__name__}: {exc}"))
                continue
            shown = catalog.render(PromptSite.RELEVANCE_SINGLE, rec.question, [passage], max_words=max_words)
            records.append(TrainingRecord(shown, verdict.value, Task.REL))
        return records, skips

    return _gather(map_ordered(one, list(dataset), parallelism), skipped)


def collect_decom(
    dataset: Sequence[QARecord],
    teacher: ModelBackend,
    *,
    catalog: PromptCatalog = DEFAULT_CATALOG,
    parallelism: int = 1,
    skipped: list[Skip] | None = None,
) -> list[TrainingRecord]:
    _require(dataset)

    def one(rec: QARecord) -> tuple[list[TrainingRecord], list[Skip]]:
        skips: list[Skip] = []
        query = catalog.render(PromptSite.DECOMPOSE, rec.question, few_shot=True)
        try:
            decomposition = parse_decomposition(teacher.complete(ModelRole.DECOMPOSER, query))
        except (BackendError, ParseError) as exc:
            _skip(skips, Skip(rec.id, Task.DECOM, f"{type(exc).__name__}: {exc}"))
            return [], skips
        shown = catalog.render(PromptSite.DECOMPOSE, rec.question)
        return [TrainingRecord(shown, decomposition.to_numbered_list(), Task.DECOM)], skips

    return _gather(map_ordered(one, list(dataset), parallelism), skipped)


def write_training_jsonl(records: Iterable[TrainingRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_training_jsonl(path: str | Path) -> list[TrainingRecord]:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return [TrainingRecord(o["input"], o["label"], o["task"]) for o in rows]
