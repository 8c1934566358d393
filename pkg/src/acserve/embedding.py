"""Tokenization, fixed-size token chunking, and unit-norm text embedders.

Tokens are whitespace-delimited words. Documents are split into windows of
`chunk_size` tokens (default 100); re-joining a document's chunks in order
reproduces its token stream exactly.

Two embedders are provided: a seeded feature-hashing bag-of-words embedder
(deterministic, offline) and a client for a remote embedding service. Both
yield unit-norm vectors, so the dot product of two embeddings is their
cosine similarity.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput

DEFAULT_CHUNK_SIZE = 100
UNIT_NORM_TOL = 1e-6


def tokenize(text: str) -> list[str]:
    """Whitespace word tokens, order preserved, never empty strings."""
    return text.split()


@dataclass(frozen=True)
class Chunk:
    """A contiguous token window of a source document."""

    doc_id: str
    seq_no: int
    text: str
    token_count: int


def chunk_document(text: str, chunk_size: int = DEFAULT_CHUNK_SIZE, doc_id: str = "") -> list[Chunk]:
    """Split `text` into consecutive windows of `chunk_size` tokens.

    Every chunk except possibly the last has exactly `chunk_size` tokens;
    whitespace-only text yields an empty list.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    tokens = tokenize(text)
    chunks = []
    for seq_no, start in enumerate(range(0, len(tokens), chunk_size)):
        window = tokens[start : start + chunk_size]
        chunks.append(Chunk(doc_id=doc_id, seq_no=seq_no, text=" ".join(window), token_count=len(window)))
    return chunks


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A unit-norm real vector; zero vectors are rejected at construction."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("zero vector cannot be an embedding")
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"embedding norm {norm} outside unit tolerance")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_raw(cls, values) -> "EmbeddingVector":
        """Normalize an arbitrary nonzero vector to unit length."""
        v = np.asarray(values, dtype=np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("zero vector cannot be an embedding")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit-norm embeddings (their dot product)."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"cosine over dims {a.dim} vs {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


class HashEmbedder:
    """Seeded feature-hashing bag-of-words embedder with L2 normalization.

    Each word is hashed (keyed BLAKE2b, so the mapping is stable across
    platforms and processes) onto one of `dim` coordinates; the vector of
    word counts is normalized to unit length. Collisions are accepted as-is.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)
        self._coord_cache: dict[str, int] = {}

    def coordinate(self, word: str) -> int:
        """The coordinate this word lands on (exposed for collision checks)."""
        idx = self._coord_cache.get(word)
        if idx is None:
            digest = hashlib.blake2b(word.encode("utf-8"), key=self._key, digest_size=8).digest()
            idx = int.from_bytes(digest, "little") % self.dim
            self._coord_cache[word] = idx
        return idx

    def embed(self, text: str) -> EmbeddingVector:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyInput("cannot embed text with no tokens")
        counts = np.zeros(self.dim, dtype=np.float64)
        for word in tokens:
            counts[self.coordinate(word)] += 1.0
        return EmbeddingVector.from_raw(counts)


class RemoteEmbedder:
    """Client for an embedding service: POST /embed {"texts": [...]}.

    The response {"vectors": [[...]], "dim": int} is re-normalized to unit
    norm and checked for dimensional consistency across calls.
    """

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.dim: int | None = None

    def embed(self, text: str) -> EmbeddingVector:
        if not tokenize(text):
            raise EmptyInput("cannot embed text with no tokens")
        body = json.dumps({"texts": [text]}).encode("utf-8")
        req = urllib.request.Request(
            self.url + "/embed", data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        vectors = payload.get("vectors")
        dim = payload.get("dim")
        if not vectors or not isinstance(dim, int):
            raise DimensionMismatch("malformed embedding service response")
        vec = np.asarray(vectors[0], dtype=np.float64)
        if vec.shape[0] != dim:
            raise DimensionMismatch(f"service reported dim {dim}, sent {vec.shape[0]}")
        if self.dim is None:
            self.dim = dim
        elif self.dim != dim:
            raise DimensionMismatch(f"service dim changed from {self.dim} to {dim}")
        return EmbeddingVector.from_raw(vec)
