"""Agent memory and retrieval: hashed bag-of-words embeddings over an
in-process vector store, exact top-k by cosine, and threshold rerank.

The embedding is a fixed constant of the wire format: casefold, split on
whitespace, FNV-1a 64-bit hash of each token modulo 64 buckets, count,
L2-normalize. Retrieval never mutates the store.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DuplicateDoc
from .textutil import fnv1a64

EMBEDDING_DIM = 64


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    tags: frozenset[str] = frozenset()
    seq: int = 0

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("document text must be non-empty")


def embed(text: str) -> tuple[float, ...]:
    """Unit-norm hashed bag-of-words vector; zero vector for empty text."""
    counts = [0.0] * EMBEDDING_DIM
    for token in text.casefold().split():
        counts[fnv1a64(token) % EMBEDDING_DIM] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        return tuple(counts)
    return tuple(c / norm for c in counts)


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; zero when either vector is zero."""
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Retrieval similarity: dot product of unit embeddings.

    Accumulation order (bucket 0 through 63, left to right) is part of the
    documented contract, so independent implementations agree bit-for-bit
    and rank ties identically.
    """
    total = 0.0
    for x, y in zip(a, b):
        total += x * y
    return total


class KnowledgeBase:
    """doc_id -> (Document, embedding); embeddings recomputable from text."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[Document, tuple[float, ...]]] = {}
        self._next_seq = 1

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._entries

    def get(self, doc_id: str) -> Document:
        return self._entries[doc_id][0]

    def documents(self) -> list[Document]:
        return [doc for doc, _ in self._entries.values()]

    def embedding(self, doc_id: str) -> tuple[float, ...]:
        return self._entries[doc_id][1]

    def digest(self) -> str:
        """Content digest used to assert retrieval never mutates the store."""
        h = hashlib.sha256()
        for doc_id in sorted(self._entries):
            doc = self._entries[doc_id][0]
            h.update(json.dumps([doc.doc_id, doc.text, sorted(doc.tags),
                                 doc.seq]).encode("utf-8"))
        return h.hexdigest()

    def recent(self, k: int) -> list[Document]:
        """At most k documents, most-recent-first by seq, ties by doc_id."""
        ordered = sorted(self.documents(),
                         key=lambda d: (-d.seq, d.doc_id))
        return ordered[:max(k, 0)]


def index(kb: KnowledgeBase, doc: Document) -> str:
    """Store a document with its embedding; doc_id must be fresh."""
    if doc.doc_id in kb:
        raise DuplicateDoc(f"document already indexed: {doc.doc_id}")
    if doc.seq == 0:
        doc = Document(doc.doc_id, doc.text, doc.tags, kb._next_seq)
    kb._next_seq = max(kb._next_seq, doc.seq) + 1
    kb._entries[doc.doc_id] = (doc, embed(doc.text))
    return doc.doc_id


def retrieve(kb: KnowledgeBase, query: str, k: int,
             tag_filter: Optional[frozenset[str] | set[str]] = None,
             ) -> list[tuple[str, float]]:
    """Exact top-k by cosine among docs whose tags cover the filter.

    Total order is (-similarity, doc_id), so equal scores rank by id and
    retrieve(k) is always a prefix of retrieve(k+1).
    """
    if k <= 0:
        return []
    query_vec = embed(query)
    scored = []
    for doc_id, (doc, vec) in kb._entries.items():
        if tag_filter and not set(tag_filter) <= set(doc.tags):
            continue
        scored.append((doc_id, similarity(query_vec, vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def rerank_filter(candidates: Iterable[tuple[str, float]],
                  threshold: float) -> list[tuple[str, float]]:
    """Drop candidates scoring below the threshold, preserving order."""
    return [(doc_id, score) for doc_id, score in candidates
            if score >= threshold]


def load_corpus(path: str | Path, kb: KnowledgeBase | None = None,
                ) -> KnowledgeBase:
    """Ingest a JSON-lines corpus of {doc_id, text, tags} records."""
    kb = kb if kb is not None else KnowledgeBase()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        raw = json.loads(line)
        index(kb, Document(raw["doc_id"], raw["text"],
                           frozenset(raw.get("tags", [])),
                           int(raw.get("seq", 0))))
    return kb
