"""Benchmarks: TTFT vs. active-adapter count, and retrieval accuracy.

The latency bench drives the full query pipeline with a fixed prompt while
the grant set grows, so the number of mixed adapters is the only thing
changing between sweep points; it reports median and p95 TTFT per count as
CSV. Absolute numbers are hardware-specific; the interesting output is
the trend, summarized by the Spearman rank correlation.

The retrieval bench mirrors the correct-adapter-in-retrieved-set
methodology: a corpus directory holds one subdirectory per topic with
`docs/` to ingest and `queries/` to score; the report gives the per-topic
hit rate and the mean number of retrieved adapters. A synthetic corpus
generator builds topics over disjoint, collision-free vocabularies.
"""

from __future__ import annotations

import csv
import os
import zlib

import numpy as np

from .adapters import AdapterRegistry, LowRankAdapter, LowRankLayerDelta
from .embedding import HashEmbedder, chunk_document
from .model import ReferenceModel, XorShift64Star
from .permissions import PermissionRegistry
from .pipeline import QueryPipeline, RetrievalConfig, aggregate_scores
from .store import EmbeddedChunk, VectorStore


def disjoint_vocabularies(
    embedder: HashEmbedder, topics: list[str], words_per_topic: int
) -> dict[str, list[str]]:
    """Per-topic word lists whose hash coordinates are pairwise distinct."""
    used: set[int] = set()
    vocab: dict[str, list[str]] = {}
    for topic in topics:
        words = []
        attempt = 0
        limit = 1000 * words_per_topic
        while len(words) < words_per_topic:
            candidate = f"{topic}_w{attempt}"
            attempt += 1
            coord = embedder.coordinate(candidate)
            if coord not in used:
                used.add(coord)
                words.append(candidate)
            if attempt > limit:
                raise RuntimeError(
                    f"embedder dim {embedder.dim} too small for {len(topics)}x{words_per_topic} "
                    "collision-free words"
                )
        vocab[topic] = words
    return vocab


def make_topic_adapter(
    topic: str,
    signature: list[tuple[int, int]],
    rank: int = 8,
    alpha: float | None = None,
    scale: float = 0.05,
    hintable: bool = True,
) -> LowRankAdapter:
    """Toy adapter derived deterministically from the topic name."""
    gen = XorShift64Star(zlib.crc32(topic.encode("utf-8")))
    r = min([rank] + [min(d_in, d_out) for d_in, d_out in signature])
    deltas = tuple(
        LowRankLayerDelta(
            layer_index=layer_index,
            A=gen.matrix(r, d_in, scale),
            B=gen.matrix(d_out, r, scale),
        )
        for layer_index, (d_in, d_out) in enumerate(signature)
    )
    return LowRankAdapter(
        id=topic,
        rank=r,
        alpha=float(alpha if alpha is not None else r),
        deltas=deltas,
        metadata={"description": f"{topic} zone"},
        hintable=hintable,
    )


def make_latency_stack(
    max_adapters: int = 10,
    dim: int = 192,
    hidden: int = 192,
    out_dim: int = 64,
    rank: int = 8,
    seed: int = 7,
):
    """Pipeline where the query ties for every adapter's single chunk.

    Granting the first c adapters makes exactly c adapters active, so the
    sweep isolates mixing cost. Returns (pipeline, user, query_text, ids).
    """
    embedder = HashEmbedder(dim=dim, seed=seed)
    signature = [(dim, hidden), (hidden, hidden), (hidden, out_dim)]
    model = ReferenceModel.seeded(signature, seed=seed)
    registry = AdapterRegistry(model.signature)
    store = VectorStore(dim=dim)
    query_text = " ".join(f"probe{i}" for i in range(12))
    adapter_ids = [f"zone{i:02d}" for i in range(max_adapters)]
    for adapter_id in adapter_ids:
        registry.register(make_topic_adapter(adapter_id, model.signature, rank=rank))
        for chunk in chunk_document(query_text, 100, doc_id=f"{adapter_id}-doc"):
            store.insert(
                EmbeddedChunk(
                    chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=adapter_id
                )
            )
    permissions = PermissionRegistry()
    pipeline = QueryPipeline(embedder, store, permissions, registry, model)
    return pipeline, "bench-user", query_text, adapter_ids


def bench_latency(
    adapter_counts: list[int],
    repeats: int = 40,
    warmup: int = 5,
    seed: int = 7,
    stack=None,
) -> list[dict]:
    """Median/p95 TTFT per active-adapter count over the sweep."""
    max_count = max(adapter_counts)
    pipeline, user, query_text, adapter_ids = stack or make_latency_stack(max_count, seed=seed)
    config = RetrievalConfig(fetch_k=max_count + 2, k=max_count + 2, hints_enabled=False)
    rows = []
    for count in adapter_counts:
        pipeline.permissions.set_permissions(user, set(adapter_ids[:count]))
        samples = []
        for i in range(warmup + repeats):
            outcome = pipeline.query(user, query_text, config)
            if len(outcome.active) != count:
                raise RuntimeError(
                    f"bench setup error: expected {count} active adapters, got {len(outcome.active)}"
                )
            if i >= warmup:
                samples.append(outcome.timing["ttft_ms"])
        rows.append(
            {
                "adapter_count": count,
                "median_ttft_ms": float(np.median(samples)),
                "p95_ttft_ms": float(np.percentile(samples, 95)),
            }
        )
    return rows


def write_latency_csv(rows: list[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["adapter_count", "median_ttft_ms", "p95_ttft_ms"])
    for row in rows:
        writer.writerow([row["adapter_count"], row["median_ttft_ms"], row["p95_ttft_ms"]])


def _ranks(values) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two sequences of equal length >= 2")
    rx = np.asarray(_ranks(xs))
    ry = np.asarray(_ranks(ys))
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def write_synthetic_corpus(
    corpus_dir,
    topics: int = 5,
    docs_per_topic: int = 4,
    doc_words: int = 250,
    queries_per_topic: int = 50,
    query_words: int = 8,
    words_per_topic: int = 12,
    dim: int = 256,
    seed: int = 0,
) -> list[str]:
    """Write a disjoint-vocabulary topic corpus; returns the topic names.

    Layout: <corpus_dir>/<topic>/docs/doc<i>.txt and .../queries/q<i>.txt.
    Queries are fresh word combinations from the topic's vocabulary, not
    copies of the documents.
    """
    embedder = HashEmbedder(dim=dim, seed=seed)
    names = [f"topic{i}" for i in range(topics)]
    vocab = disjoint_vocabularies(embedder, names, words_per_topic)
    rng = np.random.default_rng(seed + 1)
    for topic in names:
        docs_dir = os.path.join(corpus_dir, topic, "docs")
        queries_dir = os.path.join(corpus_dir, topic, "queries")
        os.makedirs(docs_dir, exist_ok=True)
        os.makedirs(queries_dir, exist_ok=True)
        words = vocab[topic]
        for d in range(docs_per_topic):
            text = " ".join(words[int(i)] for i in rng.integers(0, len(words), size=doc_words))
            with open(os.path.join(docs_dir, f"doc{d}.txt"), "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        for qi in range(queries_per_topic):
            text = " ".join(words[int(i)] for i in rng.integers(0, len(words), size=query_words))
            with open(os.path.join(queries_dir, f"q{qi}.txt"), "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
    return names


def load_corpus(corpus_dir) -> dict[str, dict[str, list[str]]]:
    """Read a topic corpus directory into {topic: {docs: [...], queries: [...]}}."""
    corpus = {}
    for topic in sorted(os.listdir(corpus_dir)):
        topic_dir = os.path.join(corpus_dir, topic)
        if not os.path.isdir(topic_dir):
            continue
        entry = {"docs": [], "queries": []}
        for kind in ("docs", "queries"):
            kind_dir = os.path.join(topic_dir, kind)
            if os.path.isdir(kind_dir):
                for name in sorted(os.listdir(kind_dir)):
                    with open(os.path.join(kind_dir, name), "r", encoding="utf-8") as fh:
                        entry[kind].append(fh.read().strip())
        if entry["docs"]:
            corpus[topic] = entry
    return corpus


def bench_retrieval(
    corpus_dir,
    dim: int = 256,
    seed: int = 0,
    fetch_k: int = 10,
    k: int = 3,
    chunk_size: int = 100,
    embedder: HashEmbedder | None = None,
) -> list[dict]:
    """Per-topic hit rate of correct-adapter-in-retrieved-set plus overall row."""
    embedder = embedder or HashEmbedder(dim=dim, seed=seed)
    corpus = load_corpus(corpus_dir)
    store = VectorStore(dim=embedder.dim)
    for topic, entry in corpus.items():
        for doc_no, text in enumerate(entry["docs"]):
            for chunk in chunk_document(text, chunk_size, doc_id=f"{topic}-doc{doc_no}"):
                store.insert(
                    EmbeddedChunk(
                        chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=topic
                    )
                )
    rows = []
    total_hits = 0
    total_queries = 0
    total_retrieved = 0
    for topic, entry in corpus.items():
        hits = 0
        retrieved_counts = []
        for query in entry["queries"]:
            scored = store.search(embedder.embed(query), fetch_k)
            candidates = aggregate_scores(scored[:k])
            retrieved_counts.append(len(candidates))
            if topic in candidates:
                hits += 1
        n_queries = len(entry["queries"])
        rows.append(
            {
                "topic": topic,
                "queries": n_queries,
                "hit_rate": hits / n_queries if n_queries else 0.0,
                "mean_retrieved": float(np.mean(retrieved_counts)) if retrieved_counts else 0.0,
            }
        )
        total_hits += hits
        total_queries += n_queries
        total_retrieved += sum(retrieved_counts)
    rows.append(
        {
            "topic": "_overall",
            "queries": total_queries,
            "hit_rate": total_hits / total_queries if total_queries else 0.0,
            "mean_retrieved": total_retrieved / total_queries if total_queries else 0.0,
        }
    )
    return rows


def write_retrieval_csv(rows: list[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["topic", "queries", "hit_rate", "mean_retrieved"])
    for row in rows:
        writer.writerow([row["topic"], row["queries"], row["hit_rate"], row["mean_retrieved"]])
