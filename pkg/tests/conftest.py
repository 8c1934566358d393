import json
import os
import urllib.error
import urllib.request

import numpy as np
import pytest

from acserve import (
    AdapterRegistry,
    EmbeddedChunk,
    HashEmbedder,
    LowRankAdapter,
    LowRankLayerDelta,
    PermissionRegistry,
    QueryPipeline,
    ReferenceModel,
    VectorStore,
    chunk_document,
    save_adapter,
)


def make_adapter(
    adapter_id: str,
    signature,
    rank: int = 2,
    alpha: float | None = None,
    seed: int = 0,
    layers=None,
    hintable: bool = True,
    metadata=None,
) -> LowRankAdapter:
    """Random adapter fitting `signature`; deltas on `layers` (default: all)."""
    rng = np.random.default_rng(seed)
    if layers is None:
        layers = range(len(signature))
    deltas = []
    for layer_index in layers:
        d_in, d_out = signature[layer_index]
        deltas.append(
            LowRankLayerDelta(
                layer_index=layer_index,
                A=rng.normal(scale=0.2, size=(rank, d_in)),
                B=rng.normal(scale=0.2, size=(d_out, rank)),
            )
        )
    return LowRankAdapter(
        id=adapter_id,
        rank=rank,
        alpha=float(alpha if alpha is not None else rank),
        deltas=tuple(deltas),
        metadata=metadata or {"description": f"adapter {adapter_id}"},
        hintable=hintable,
    )


def disjoint_vocab(embedder: HashEmbedder, topics: list[str], words_per_topic: int):
    """Per-topic word lists whose hash coordinates are all pairwise distinct."""
    used: set[int] = set()
    vocab: dict[str, list[str]] = {}
    for topic in topics:
        words = []
        attempt = 0
        limit = 1000 * words_per_topic
        while len(words) < words_per_topic:
            candidate = f"{topic}w{attempt}"
            attempt += 1
            coord = embedder.coordinate(candidate)
            if coord not in used:
                used.add(coord)
                words.append(candidate)
            if attempt > limit:
                raise RuntimeError("dim too small for a collision-free vocabulary")
        vocab[topic] = words
    return vocab


def ingest_topic(store: VectorStore, embedder, tag: str, texts, chunk_size: int = 100):
    for doc_no, text in enumerate(texts):
        for chunk in chunk_document(text, chunk_size, doc_id=f"{tag}-doc{doc_no}"):
            store.insert(
                EmbeddedChunk(chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=tag)
            )


def build_stack(
    topics=("alpha", "beta", "gamma"),
    dim=32,
    seed=0,
    words_per_topic=6,
    docs_per_topic=2,
    doc_words=30,
    chunk_size=10,
    hintable=None,
    model_signature=None,
):
    """A full serving stack over synthetic topics with disjoint vocabularies.

    Each topic gets one adapter and a few ingested documents built from its
    own words, so any pure-topic query retrieves exactly that topic.
    Returns (pipeline, vocab) with vocab mapping topic -> word list.
    """
    embedder = HashEmbedder(dim=dim, seed=seed)
    vocab = disjoint_vocab(embedder, list(topics), words_per_topic)
    signature = model_signature or [(dim, dim), (dim, 8)]
    model = ReferenceModel.seeded(signature, seed=seed)
    registry = AdapterRegistry(model.signature)
    store = VectorStore(dim=dim)
    word_rng = np.random.default_rng(seed + 1)
    for topic_no, topic in enumerate(topics):
        registry.register(
            make_adapter(
                topic,
                model.signature,
                rank=2,
                seed=seed + 10 + topic_no,
                hintable=True if hintable is None else hintable.get(topic, True),
                metadata={"description": f"{topic} knowledge zone"},
            )
        )
        words = vocab[topic]
        for doc_no in range(docs_per_topic):
            text = " ".join(
                words[int(i)] for i in word_rng.integers(0, len(words), size=doc_words)
            )
            ingest_topic(store, embedder, topic, [text], chunk_size=chunk_size)
    permissions = PermissionRegistry()
    pipeline = QueryPipeline(embedder, store, permissions, registry, model)
    return pipeline, vocab


def make_service_workspace(
    root,
    dim=32,
    seed=0,
    topics=("alpha", "beta", "gamma"),
    admin_token="sesame",
    hintable=None,
    retrieval=None,
):
    """Persist a full serving workspace (model/adapters/store/permissions).

    Returns (config_path, vocab). The config listens on an ephemeral port.
    """
    root = str(root)
    os.makedirs(root, exist_ok=True)
    embedder = HashEmbedder(dim=dim, seed=seed)
    vocab = disjoint_vocab(embedder, list(topics), 6)
    model = ReferenceModel.seeded([(dim, dim), (dim, 8)], seed=seed)
    model_path = os.path.join(root, "model.acmodel")
    model.save(model_path)
    adapters_dir = os.path.join(root, "adapters")
    os.makedirs(adapters_dir, exist_ok=True)
    store = VectorStore(dim=dim)
    word_rng = np.random.default_rng(seed + 1)
    for topic_no, topic in enumerate(topics):
        adapter = make_adapter(
            topic,
            model.signature,
            rank=2,
            seed=seed + 10 + topic_no,
            hintable=True if hintable is None else hintable.get(topic, True),
            metadata={"description": f"{topic} knowledge zone"},
        )
        save_adapter(adapter, os.path.join(adapters_dir, f"{topic}.acadapter"))
        words = vocab[topic]
        for doc_no in range(2):
            text = " ".join(words[int(i)] for i in word_rng.integers(0, len(words), size=30))
            ingest_topic(store, embedder, topic, [text], chunk_size=10)
    store_path = os.path.join(root, "store.acstore")
    store.save(store_path)
    perms_path = os.path.join(root, "perms.acperm")
    PermissionRegistry().save(perms_path)
    config = {
        "listen": "127.0.0.1:0",
        "model": model_path,
        "store": store_path,
        "adapters_dir": adapters_dir,
        "permissions": perms_path,
        "embedder": {"builtin": {"dim": dim, "seed": seed}},
        "retrieval": retrieval or {"fetch_k": 10, "k": 3, "threshold": 0.0, "hints_enabled": True},
        "metrics_enabled": True,
        "admin_token": admin_token,
    }
    config_path = os.path.join(root, "config.json")
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
    return config_path, vocab


def http_request(port, method, path, body=None, headers=None, raw=None):
    """JSON request against a test server; returns (status, parsed body)."""
    url = f"http://127.0.0.1:{port}{path}"
    if raw is not None:
        data = raw
    elif body is not None:
        data = json.dumps(body).encode("utf-8")
    else:
        data = None
    all_headers = {"Content-Type": "application/json"}
    all_headers.update(headers or {})
    req = urllib.request.Request(url, data=data, method=method, headers=all_headers)
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read() or b"{}")
    except urllib.error.HTTPError as exc:
        payload = exc.read()
        try:
            return exc.code, json.loads(payload)
        except json.JSONDecodeError:
            return exc.code, {"raw": payload.decode("utf-8", "replace")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
