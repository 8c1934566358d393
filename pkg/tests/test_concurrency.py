"""Reader-writer contracts: snapshots, never partial state."""

import threading

import numpy as np
import pytest
from conftest import http_request, make_service_workspace

from acserve import EmbeddedChunk, EmbeddingVector, VectorStore, chunk_document
from acserve.service import Service, load_config


def test_searches_never_observe_partial_state(rng):
    dim = 8
    store = VectorStore(dim=dim)
    stop = threading.Event()
    errors = []

    def writer():
        i = 0
        while not stop.is_set():
            vec = np.zeros(dim)
            vec[i % dim] = 1.0
            chunk = chunk_document("one token", 10, doc_id=f"d{i}")[0]
            store.insert(
                EmbeddedChunk(
                    chunk=chunk,
                    embedding=EmbeddingVector.from_raw(vec),
                    adapter_tag=f"T{i % 3}",
                )
            )
            if i % 7 == 6:
                store.remove_by_tag(f"T{(i - 1) % 3}")
            i += 1

    def reader():
        q = EmbeddingVector.from_raw(np.ones(dim))
        while not stop.is_set():
            try:
                hits = store.search(q, fetch_k=50)
                # a snapshot is internally consistent: scores sorted, refs resolvable
                scores = [h.score for h in hits]
                assert scores == sorted(scores, reverse=True)
                for h in hits:
                    assert h.adapter_tag.startswith("T")
            except AssertionError as exc:  # pragma: no cover - failure path
                errors.append(exc)
                stop.set()
            except Exception as exc:  # pragma: no cover - failure path
                errors.append(exc)
                stop.set()

    threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    stop.wait(timeout=1.0)
    stop.set()
    for t in threads:
        t.join(timeout=5)
    assert not errors, errors[0]


@pytest.fixture
def server(tmp_path):
    config_path, vocab = make_service_workspace(tmp_path)
    service = Service(load_config(config_path))
    service.start()
    yield service, vocab
    service.stop()


def test_concurrent_queries_and_admin_mutations(server):
    service, vocab = server
    token = {"X-Admin-Token": "sesame"}
    status, _ = http_request(
        service.port, "PUT", "/v1/admin/permissions/worker", {"grants": ["alpha"]}, token
    )
    assert status == 200
    query = {"user_id": "worker", "query": " ".join(vocab["alpha"][:3])}
    failures = []

    def issue_queries():
        for _ in range(25):
            status, payload = http_request(service.port, "POST", "/v1/query", query)
            if status != 200:
                failures.append(payload)
                return
            # snapshot consistency: active either empty (post-delete) or alpha
            active = {a["id"] for a in payload["active"]}
            if not active <= {"alpha"}:
                failures.append(payload)
                return

    def churn_permissions():
        for i in range(25):
            grants = ["alpha"] if i % 2 == 0 else ["alpha", "beta"]
            status, payload = http_request(
                service.port, "PUT", "/v1/admin/permissions/other", {"grants": grants}, token
            )
            if status != 200:
                failures.append(payload)
                return

    threads = [threading.Thread(target=issue_queries) for _ in range(4)] + [
        threading.Thread(target=churn_permissions)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)
    assert not failures, failures[0]
    status, metrics = http_request(service.port, "GET", "/v1/metrics")
    assert metrics["queries_total"] == 100
