"""Versioned, hot-swappable persistence for retrieval indexes.

Layout under a store root:

    <root>/1/ <root>/2/ ...   immutable version directories
    <root>/CURRENT            pointer file naming the live version

A publish writes the new version directory completely, then replaces
CURRENT atomically. Readers resolve CURRENT once per load, so an audit that
already loaded version N keeps N even while N+1 is being published; a crash
before the pointer swap leaves CURRENT untouched and the half-written
directory unreferenced.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Generic, TypeVar

from solguard.errors import SnapshotError
from solguard.retrieval.kb import KbChunk, KbIndex
from solguard.retrieval.tfidf import CorpusDocument, CorpusIndex, TfIdfVector

T = TypeVar("T")

POINTER_NAME = "CURRENT"


class SnapshotStore(Generic[T]):
    """Base store; subclasses serialize one index type."""

    kind = "index"

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- public API ----------------------------------------------------

    def current_version(self) -> int | None:
        pointer = self.root / POINTER_NAME
        try:
            return int(pointer.read_text(encoding="utf-8").strip())
        except FileNotFoundError:
            return None
        except ValueError as exc:
            raise SnapshotError(f"corrupt pointer file {pointer}: {exc}") from exc

    def publish(self, index: T) -> int:
        """Write a new snapshot and swap the pointer; returns the version."""
        version = self._next_version()
        target = self.root / str(version)
        target.mkdir(parents=True, exist_ok=False)
        stamped = self._with_version(index, version)
        self._write_files(target, stamped)
        self._activate(version)
        return version

    def load(self) -> T:
        """Load the currently published snapshot."""
        version = self.current_version()
        if version is None:
            raise SnapshotError(f"no snapshot published under {self.root}")
        return self.load_version(version)

    def load_version(self, version: int) -> T:
        target = self.root / str(version)
        if not target.is_dir():
            raise SnapshotError(f"snapshot directory {target} is missing")
        index = self._read_files(target)
        meta = _read_json(target / "meta.json")
        if meta.get("version") != version:
            raise SnapshotError(
                f"snapshot {target} is internally inconsistent: "
                f"meta names version {meta.get('version')}"
            )
        return index

    def versions(self) -> list[int]:
        if not self.root.is_dir():
            return []
        return sorted(int(p.name) for p in self.root.iterdir() if p.is_dir() and p.name.isdigit())

    # -- internals -------------------------------------------------------

    def _next_version(self) -> int:
        current = self.current_version() or 0
        existing = self.versions()
        return max([current, *existing]) + 1 if existing or current else 1

    def _activate(self, version: int) -> None:
        """Atomically repoint CURRENT at ``version``."""
        pointer = self.root / POINTER_NAME
        tmp = self.root / f"{POINTER_NAME}.tmp"
        tmp.write_text(f"{version}\n", encoding="utf-8")
        os.replace(tmp, pointer)

    def _with_version(self, index: T, version: int) -> T:
        raise NotImplementedError

    def _write_files(self, target: Path, index: T) -> None:
        raise NotImplementedError

    def _read_files(self, target: Path) -> T:
        raise NotImplementedError


class CorpusSnapshotStore(SnapshotStore[CorpusIndex]):
    kind = "corpus"

    def _with_version(self, index: CorpusIndex, version: int) -> CorpusIndex:
        return CorpusIndex(index.documents, index.idf, snapshot_version=version)

    def _write_files(self, target: Path, index: CorpusIndex) -> None:
        _write_json(target / "idf.json", index.idf)
        with open(target / "docs.jsonl", "w", encoding="utf-8") as fh:
            for doc in index.documents:
                fh.write(
                    json.dumps(
                        {
                            "id": doc.id,
                            "label": doc.label,
                            "classes": list(doc.classes),
                            "vector": doc.vector.weights,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        _write_json(
            target / "meta.json",
            {"kind": self.kind, "version": index.snapshot_version, "documents": len(index.documents)},
        )

    def _read_files(self, target: Path) -> CorpusIndex:
        meta = _read_json(target / "meta.json")
        idf = _read_json(target / "idf.json")
        documents: list[CorpusDocument] = []
        for line in (target / "docs.jsonl").read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            documents.append(
                CorpusDocument(
                    id=rec["id"],
                    label=rec["label"],
                    classes=tuple(rec["classes"]),
                    vector=TfIdfVector(rec["vector"]),
                )
            )
        return CorpusIndex(tuple(documents), idf, snapshot_version=int(meta["version"]))


class KbSnapshotStore(SnapshotStore[KbIndex]):
    kind = "kb"

    def _with_version(self, index: KbIndex, version: int) -> KbIndex:
        return KbIndex(index.chunks, index.embedder_id, snapshot_version=version)

    def _write_files(self, target: Path, index: KbIndex) -> None:
        with open(target / "chunks.jsonl", "w", encoding="utf-8") as fh:
            for chunk in index.chunks:
                fh.write(
                    json.dumps(
                        {
                            "doc_id": chunk.doc_id,
                            "chunk_index": chunk.chunk_index,
                            "text": chunk.text,
                            "metadata": chunk.metadata,
                            "embedding": list(chunk.embedding),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        _write_json(
            target / "meta.json",
            {
                "kind": self.kind,
                "version": index.snapshot_version,
                "embedder": index.embedder_id,
                "documents": len({c.doc_id for c in index.chunks}),
                "chunks": len(index.chunks),
            },
        )

    def _read_files(self, target: Path) -> KbIndex:
        meta = _read_json(target / "meta.json")
        chunks: list[KbChunk] = []
        for line in (target / "chunks.jsonl").read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(
                KbChunk(
                    doc_id=rec["doc_id"],
                    chunk_index=rec["chunk_index"],
                    text=rec["text"],
                    metadata=rec["metadata"],
                    embedding=tuple(rec["embedding"]),
                )
            )
        return KbIndex(tuple(chunks), meta["embedder"], snapshot_version=int(meta["version"]))


def _write_json(path: Path, payload: object) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=0), encoding="utf-8")


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise SnapshotError(f"snapshot file {path} is missing") from exc
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot file {path} is corrupt: {exc}") from exc
