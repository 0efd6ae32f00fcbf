"""Corpus chunking and an Okapi BM25 inverted index.

Documents are cut into consecutive, non-overlapping 100-word chunks; each
chunk is one retrievable passage. Tokenisation for scoring is lowercase and
splits on anything that is not a letter or digit. Scores use

    idf(t)    = ln((N - df + 0.5) / (df + 0.5) + 1)
    w(t, c)   = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(c) / avg_len))
    score(c)  = sum of w over the distinct query terms, in sorted term order

with ``len(c)`` counted in tokens.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .core import Passage
from .errors import EmptyCorpus, EmptyDocument, EmptyQuery

CHUNK_WORDS = 100
INDEX_FORMAT = "raisf.index"
INDEX_VERSION = 1

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def chunk_document(doc_id: str, text: str, size: int = CHUNK_WORDS) -> list[Passage]:
    words = text.split()
    if not words:
        raise EmptyDocument(f"document {doc_id!r} has no words")
    return [
        Passage(doc_id, n, " ".join(words[start : start + size]))
        for n, start in enumerate(range(0, len(words), size))
    ]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            if not doc.text.strip():
                raise EmptyDocument(f"document {doc.doc_id!r} is empty")
            seen.add(doc.doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, str]]) -> Corpus:
        return cls(tuple(Document(str(r["doc_id"]), r["text"]) for r in records))

    @classmethod
    def from_jsonl(cls, path: str | Path) -> Corpus:
        with open(path, encoding="utf-8") as fh:
            return cls.from_records(json.loads(line) for line in fh if line.strip())

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.documents:
                fh.write(json.dumps({"doc_id": doc.doc_id, "text": doc.text}, ensure_ascii=False) + "\n")


class Retriever(Protocol):
    """Extension point for other retrievers (dense, hybrid, remote)."""

    def retrieve(self, query: str, k: int, max_words: int | None = None) -> list[Passage]: ...


class PassageIndex:
    """Immutable BM25 index over chunk passages. Build it with :func:`build_index`."""

    def __init__(
        self,
        chunks: Sequence[Passage],
        postings: Mapping[str, Sequence[tuple[int, int]]],
        doc_lengths: Sequence[int],
        k1: float = 1.2,
        b: float = 0.75,
    ) -> None:
        if len(chunks) != len(doc_lengths):
            raise ValueError("chunks and doc_lengths disagree")
        self.chunks = tuple(chunks)
        self.postings = {t: tuple((int(o), int(tf)) for o, tf in p) for t, p in postings.items()}
        self.doc_lengths = tuple(doc_lengths)
        self.k1 = k1
        self.b = b
        self.num_chunks = len(self.chunks)
        self.avg_doc_length = sum(self.doc_lengths) / self.num_chunks if self.num_chunks else 0.0
        n = self.num_chunks
        self._idf = {t: math.log((n - len(p) + 0.5) / (len(p) + 0.5) + 1) for t, p in self.postings.items()}
        avg = self.avg_doc_length
        norm = [k1 * (1 - b + b * dl / avg) if avg else k1 * (1 - b) for dl in self.doc_lengths]
        # per-posting term weights, so a query is one bincount over its terms
        self._weights: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for term, posting in self.postings.items():
            idf = self._idf[term]
            ords = np.fromiter((o for o, _ in posting), dtype=np.int64, count=len(posting))
            w = np.fromiter(
                (idf * tf * (k1 + 1) / (tf + norm[o]) for o, tf in posting), dtype=np.float64, count=len(posting)
            )
            self._weights[term] = (ords, w)
        order = sorted(range(n), key=lambda o: self.chunks[o].key)
        self._key_rank = np.empty(n, dtype=np.int64)
        self._key_rank[order] = np.arange(n)

    def idf(self, term: str) -> float:
        return self._idf.get(term, 0.0)

    def _score_vector(self, query: str) -> np.ndarray:
        terms = sorted(set(tokenize(query)))
        if not terms:
            raise EmptyQuery(f"query {query!r} has no indexable tokens")
        hits = [self._weights[t] for t in terms if t in self._weights]
        if not hits:
            return np.zeros(self.num_chunks)
        # Contributions are added in ascending order per chunk, so two chunks
        # holding the same contributions under different terms tie exactly.
        cand = np.unique(np.concatenate([h[0] for h in hits]))
        parts = np.zeros((len(hits), len(cand)))
        for row, (ords, weights) in zip(parts, hits):
            row[np.searchsorted(cand, ords)] = weights
        parts.sort(axis=0)
        vec = np.zeros(self.num_chunks)
        vec[cand] = np.add.reduce(parts, axis=0)
        return vec

    def scores(self, query: str) -> dict[int, float]:
        """Positive BM25 score per chunk ordinal."""
        vec = self._score_vector(query)
        return {int(o): float(vec[o]) for o in np.flatnonzero(vec > 0)}

    def retrieve(self, query: str, k: int, max_words: int | None = None) -> list[Passage]:
        """Top ``k`` chunks by score, ties broken by ``(doc_id, chunk_index)``.

        Chunks scoring zero are never returned. With ``max_words`` set, each
        returned passage keeps only its first ``max_words`` words.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        vec = self._score_vector(query)
        cand = np.flatnonzero(vec > 0)
        if len(cand) > k:
            # keep everything tied with the k-th best so the tie-break sees all of them
            kth = np.partition(vec[cand], len(cand) - k)[len(cand) - k]
            cand = cand[vec[cand] >= kth]
        best = cand[np.lexsort((self._key_rank[cand], -vec[cand]))][:k]
        out = []
        for ordinal in best:
            chunk = self.chunks[ordinal]
            text = chunk.text if max_words is None else " ".join(chunk.text.split()[:max_words])
            out.append(replace(chunk, text=text, score=float(vec[ordinal])))
        return out

    def to_dict(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "bm25": {"k1": self.k1, "b": self.b},
            "chunks": [[c.doc_id, c.chunk_index, c.text] for c in self.chunks],
            "doc_lengths": list(self.doc_lengths),
            "postings": {t: [list(e) for e in p] for t, p in self.postings.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: Mapping) -> PassageIndex:
        if data.get("format") != INDEX_FORMAT or data.get("version") != INDEX_VERSION:
            raise ValueError(f"not a {INDEX_FORMAT} v{INDEX_VERSION} file")
        chunks = [Passage(d, i, t) for d, i, t in data["chunks"]]
        return cls(chunks, data["postings"], data["doc_lengths"], **data["bm25"])

    @classmethod
    def load(cls, path: str | Path) -> PassageIndex:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_index(corpus: Corpus, k1: float = 1.2, b: float = 0.75) -> PassageIndex:
    if not corpus.documents:
        raise EmptyCorpus("corpus has no documents")
    chunks: list[Passage] = []
    for doc in corpus.documents:
        chunks.extend(chunk_document(doc.doc_id, doc.text))
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths = []
    for ordinal, chunk in enumerate(chunks):
        counts = Counter(tokenize(chunk.text))
        lengths.append(sum(counts.values()))
        for term in sorted(counts):
            postings.setdefault(term, []).append((ordinal, counts[term]))
    return PassageIndex(chunks, {t: postings[t] for t in sorted(postings)}, lengths, k1, b)


def retrieve(index: Retriever, query: str, k: int, max_words: int | None = None) -> list[Passage]:
    return index.retrieve(query, k, max_words)
