"""Exact-scan cosine vector store over adapter-tagged embedded chunks.

Every row is a chunk embedding plus its adapter tag. Search is an exact
exhaustive scan (no approximate index): scores are cosine similarities,
results are sorted descending with ties broken by insertion order, and an
optional tag filter is applied inside the store so that a filtered search
is exactly a search over the sub-store holding those tags.

Concurrency: many readers or one writer. Searches snapshot the row set
under the lock and never observe partial state.

Persistence (`.acstore`): JSON manifest {format_version, dim, count,
chunks[{doc_id, seq_no, token_count, tag, text}], blob_crc32} plus a
little-endian float32 blob of embeddings in row order and a CRC32 trailer.
Stored embedding values are quantized to float32 at insert, so a saved and
reloaded store returns bit-identical scores.
"""

from __future__ import annotations

import threading
import zlib
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .embedding import Chunk, EmbeddingVector
from .errors import CorruptFile, DimensionMismatch
from .persist import MAGIC_STORE, matrix_to_bytes, read_container, write_container

STORE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EmbeddedChunk:
    chunk: Chunk
    embedding: EmbeddingVector
    adapter_tag: str


@dataclass(frozen=True)
class ScoredChunk:
    """A search hit: stable chunk handle, cosine score, adapter tag."""

    chunk_ref: int
    score: float
    adapter_tag: str


class VectorStore:
    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._lock = threading.RLock()
        self._handles: list[int] = []
        self._chunks: list[Chunk] = []
        self._tags: list[str] = []
        self._rows: list[np.ndarray] = []  # float64 rows with float32-representable values
        self._matrix: np.ndarray | None = None
        self._next_handle = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._handles)

    def insert(self, ec: EmbeddedChunk) -> int:
        """Add a chunk; returns a handle stable until the chunk is removed.

        Identical chunks are kept as separate entries (no deduplication).
        """
        if ec.embedding.dim != self.dim:
            raise DimensionMismatch(f"store dim {self.dim}, embedding dim {ec.embedding.dim}")
        row = ec.embedding.values.astype(np.float32).astype(np.float64)
        with self._lock:
            handle = self._next_handle
            self._next_handle += 1
            self._handles.append(handle)
            self._chunks.append(ec.chunk)
            self._tags.append(ec.adapter_tag)
            self._rows.append(row)
            self._matrix = None
            return handle

    def remove_by_tag(self, tag: str) -> int:
        """Remove every chunk carrying `tag`; returns the count removed."""
        with self._lock:
            keep = [i for i, t in enumerate(self._tags) if t != tag]
            removed = len(self._tags) - len(keep)
            if removed:
                self._handles = [self._handles[i] for i in keep]
                self._chunks = [self._chunks[i] for i in keep]
                self._tags = [self._tags[i] for i in keep]
                self._rows = [self._rows[i] for i in keep]
                self._matrix = None
            return removed

    def chunk(self, handle: int) -> Chunk:
        with self._lock:
            return self._chunks[self._handles.index(handle)]

    def tags(self) -> set[str]:
        with self._lock:
            return set(self._tags)

    def doc_ids(self) -> set[str]:
        with self._lock:
            return {c.doc_id for c in self._chunks}

    def document_text(self, doc_id: str) -> str | None:
        """Reassemble a document from its chunks in seq_no order."""
        with self._lock:
            parts = sorted(
                (c for c in self._chunks if c.doc_id == doc_id), key=lambda c: c.seq_no
            )
        if not parts:
            return None
        return " ".join(c.text for c in parts)

    def _snapshot(self):
        with self._lock:
            if self._matrix is None:
                if self._rows:
                    self._matrix = np.vstack(self._rows)
                else:
                    self._matrix = np.zeros((0, self.dim), dtype=np.float64)
            return self._matrix, list(self._handles), list(self._tags)

    def search(
        self,
        q: EmbeddingVector,
        fetch_k: int,
        allowed_tags: Iterable[str] | None = None,
    ) -> list[ScoredChunk]:
        """Top-`fetch_k` chunks by cosine similarity, descending.

        With `allowed_tags`, only chunks whose tag is in the set are scored
        or returned (the access-control filter runs inside the store). Ties
        break by insertion order, earlier first.
        """
        if q.dim != self.dim:
            raise DimensionMismatch(f"store dim {self.dim}, query dim {q.dim}")
        if fetch_k < 1:
            raise ValueError("fetch_k must be >= 1")
        matrix, handles, tags = self._snapshot()
        if allowed_tags is not None:
            allowed = set(allowed_tags)
            idx = [i for i, t in enumerate(tags) if t in allowed]
            if not idx:
                return []
            matrix = matrix[idx]
            handles = [handles[i] for i in idx]
            tags = [tags[i] for i in idx]
        if matrix.shape[0] == 0:
            return []
        scores = matrix @ q.values
        order = np.argsort(-scores, kind="stable")[:fetch_k]
        return [
            ScoredChunk(chunk_ref=handles[i], score=float(scores[i]), adapter_tag=tags[i])
            for i in order
        ]

    def save(self, path) -> None:
        with self._lock:
            blob = matrix_to_bytes(np.vstack(self._rows)) if self._rows else b""
            manifest = {
                "format_version": STORE_FORMAT_VERSION,
                "dim": self.dim,
                "count": len(self._handles),
                "chunks": [
                    {
                        "doc_id": c.doc_id,
                        "seq_no": c.seq_no,
                        "token_count": c.token_count,
                        "tag": t,
                        "text": c.text,
                    }
                    for c, t in zip(self._chunks, self._tags)
                ],
                "blob_crc32": zlib.crc32(blob) & 0xFFFFFFFF,
            }
        write_container(path, MAGIC_STORE, manifest, blob)

    @classmethod
    def load(cls, path) -> "VectorStore":
        manifest, blob = read_container(path, MAGIC_STORE, STORE_FORMAT_VERSION)
        if manifest.get("blob_crc32") != zlib.crc32(blob) & 0xFFFFFFFF:
            raise CorruptFile(f"{path}: manifest blob_crc32 disagrees with blob")
        dim = manifest["dim"]
        count = manifest["count"]
        if len(blob) != 4 * dim * count or len(manifest["chunks"]) != count:
            raise CorruptFile(f"{path}: count/blob size mismatch")
        store = cls(dim)
        rows = np.frombuffer(blob, dtype="<f4").astype(np.float64).reshape(count, dim)
        for meta, row in zip(manifest["chunks"], rows):
            chunk = Chunk(
                doc_id=meta["doc_id"],
                seq_no=meta["seq_no"],
                text=meta["text"],
                token_count=meta["token_count"],
            )
            handle = store._next_handle
            store._next_handle += 1
            store._handles.append(handle)
            store._chunks.append(chunk)
            store._tags.append(meta["tag"])
            store._rows.append(row)
        return store
