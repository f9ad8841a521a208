"""Contract-similarity index: TF-IDF vectors, cosine ranking, and the
retrieval detection channel.

Weighting scheme (stated exactly so independent oracles can reproduce it):
tf = term count / document term count; idf = ln((1+N)/(1+df)) + 1;
weight = tf * idf; vectors are L2-normalized. Neighbor ranks are weighted
linearly, rank 1 heaviest, weights summing to 1.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from solguard.core import (
    Channel,
    ChannelResult,
    Finding,
    Location,
    SourceContract,
    Span,
    Verdict,
    VulnerabilityClass,
    byte_length,
)
from solguard.errors import DatasetError
from solguard.retrieval.terms import tokenize_for_tfidf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TfIdfVector:
    """Sparse term->weight map with its L2 norm cached at construction."""

    weights: dict[str, float]
    norm: float = field(default=-1.0)

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("tf-idf weights must be non-negative")
        if self.norm < 0:
            object.__setattr__(self, "norm", math.sqrt(sum(w * w for w in self.weights.values())))

    def dot(self, other: "TfIdfVector") -> float:
        a, b = self.weights, other.weights
        if len(b) < len(a):
            a, b = b, a
        return sum(w * b[t] for t, w in a.items() if t in b)


def cosine(a: TfIdfVector, b: TfIdfVector) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return min(1.0, a.dot(b) / (a.norm * b.norm))


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    label: str  # safe | vulnerable
    classes: tuple[str, ...]
    vector: TfIdfVector


@dataclass(frozen=True)
class CorpusIndex:
    documents: tuple[CorpusDocument, ...]
    idf: dict[str, float]
    snapshot_version: int = 0

    def vectorize(self, terms: Iterable[str]) -> TfIdfVector:
        """Project a term list into this index's weighting space."""
        counts = Counter(terms)
        total = sum(counts.values())
        if total == 0:
            return TfIdfVector({})
        raw = {
            term: (count / total) * self.idf[term]
            for term, count in counts.items()
            if term in self.idf
        }
        return _l2_normalize(raw)


@dataclass(frozen=True)
class Neighbor:
    contract_id: str
    similarity: float
    rank: int  # 1-based, contiguous
    label: str
    classes: tuple[str, ...] = ()


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 5
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")


def _l2_normalize(raw: dict[str, float]) -> TfIdfVector:
    norm = math.sqrt(sum(w * w for w in raw.values()))
    if norm == 0.0:
        return TfIdfVector(dict(raw), 0.0)
    return TfIdfVector({t: w / norm for t, w in raw.items()}, 1.0)


def build_corpus_index(
    docs: list[tuple[str, str, tuple[str, ...], str]],
    snapshot_version: int = 0,
) -> CorpusIndex:
    """Index labeled contracts given as (id, label, classes, source) tuples."""
    if not docs:
        raise ValueError("corpus must contain at least one document")
    term_lists = [tokenize_for_tfidf(source) for _, _, _, source in docs]
    n = len(docs)
    df: Counter[str] = Counter()
    for terms in term_lists:
        df.update(set(terms))
    idf = {term: math.log((1 + n) / (1 + d)) + 1.0 for term, d in df.items()}

    documents: list[CorpusDocument] = []
    for (doc_id, label, classes, _), terms in zip(docs, term_lists):
        total = len(terms)
        if total == 0:
            log.warning("corpus document %s has no terms; indexing a zero vector", doc_id)
            vector = TfIdfVector({})
        else:
            counts = Counter(terms)
            raw = {term: (count / total) * idf[term] for term, count in counts.items()}
            vector = _l2_normalize(raw)
        documents.append(CorpusDocument(doc_id, label, tuple(classes), vector))
    return CorpusIndex(tuple(documents), idf, snapshot_version)


def top_k(query: SourceContract, index: CorpusIndex, cfg: RetrievalConfig) -> list[Neighbor]:
    """Exact top-k scan, similarity descending, ties broken by id ascending.

    The query's own id is excluded when present in the index.
    """
    qvec = index.vectorize(tokenize_for_tfidf(query.source))
    scored = [
        (doc, cosine(qvec, doc.vector))
        for doc in index.documents
        if doc.id != query.id
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0].id))
    return [
        Neighbor(doc.id, sim, rank, doc.label, doc.classes)
        for rank, (doc, sim) in enumerate(scored[: cfg.k], start=1)
    ]


def rank_weights(m: int) -> list[float]:
    """Linear-decay rank weights (m+1-i)/sum for ranks i=1..m; they sum to 1."""
    total = m * (m + 1) / 2
    return [(m + 1 - i) / total for i in range(1, m + 1)]


def rank_weighted_probability(neighbors: list[Neighbor]) -> float:
    """Probability of vulnerability from neighbor labels, rank-weighted."""
    if not neighbors:
        return 0.0
    weights = rank_weights(len(neighbors))
    return sum(w for w, nb in zip(weights, neighbors) if nb.label == "vulnerable")


def retrieval_channel(
    query: SourceContract, index: CorpusIndex, cfg: RetrievalConfig
) -> ChannelResult:
    """Similarity retrieval as a detection channel.

    The score is the rank-weighted vulnerable probability over the top-k
    neighbors; neighbor vulnerability classes surface as low-confidence,
    contract-level findings.
    """
    neighbors = top_k(query, index, cfg)
    score = rank_weighted_probability(neighbors)
    verdict = Verdict.VULNERABLE if score >= cfg.threshold else Verdict.SAFE
    classes: list[str] = []
    for nb in neighbors:
        if nb.label != "vulnerable":
            continue
        for name in nb.classes:
            if name not in classes:
                classes.append(name)
    whole = Location(span=Span(0, byte_length(query.source)), function="")
    findings = tuple(
        Finding(
            contract_id=query.id,
            vuln_class=VulnerabilityClass(name=name),
            location=whole,
            evidence="similar contracts in the corpus share this weakness",
            channel=Channel.RETRIEVAL,
            confidence=score,
        )
        for name in classes
    )
    return ChannelResult(channel=Channel.RETRIEVAL, verdict=verdict, score=score, findings=findings)


def load_corpus_file(path: str | Path) -> list[tuple[str, str, tuple[str, ...], str]]:
    """Read a line-delimited corpus file.

    Each line is a JSON record {id, label, classes?, source | source_path};
    source_path is resolved relative to the corpus file.
    """
    p = Path(path)
    docs: list[tuple[str, str, tuple[str, ...], str]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            doc_id = rec["id"]
            label = rec["label"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{p}:{lineno}: bad corpus record: {exc}") from exc
        if label not in ("safe", "vulnerable"):
            raise DatasetError(f"{p}:{lineno}: label must be safe|vulnerable, got {label!r}")
        if doc_id in seen:
            raise DatasetError(f"{p}:{lineno}: duplicate contract id {doc_id!r}")
        seen.add(doc_id)
        if "source" in rec:
            source = rec["source"]
        elif "source_path" in rec:
            source = (p.parent / rec["source_path"]).read_text(encoding="utf-8")
        else:
            raise DatasetError(f"{p}:{lineno}: record needs source or source_path")
        docs.append((doc_id, label, tuple(rec.get("classes", [])), source))
    if not docs:
        raise DatasetError(f"{p}: corpus file is empty")
    return docs
