"""End-to-end over HTTP: serve fixtures, query, hint, grant, re-query.

Builds a throwaway workspace (model, adapters, tagged store, permissions),
starts the service on an ephemeral port, and drives it the way the
operator console does: query as a restricted user, read the hint, grant
the hinted zone through the admin API, and query again.
"""

import json
import tempfile
import urllib.request

import numpy as np

from acserve import (
    AdapterRegistry,
    EmbeddedChunk,
    HashEmbedder,
    PermissionRegistry,
    ReferenceModel,
    VectorStore,
    chunk_document,
    save_adapter,
)
from acserve.bench import disjoint_vocabularies, make_topic_adapter
from acserve.service import Service, ServiceConfig

import os

root = tempfile.mkdtemp(prefix="acserve-demo-")
DIM = 64
embedder = HashEmbedder(dim=DIM, seed=0)
vocab = disjoint_vocabularies(embedder, ["research", "sales"], 8)

model = ReferenceModel.seeded([(DIM, 32), (32, 8)], seed=0)
model.save(os.path.join(root, "model.acmodel"))

adapters_dir = os.path.join(root, "adapters")
os.makedirs(adapters_dir)
store = VectorStore(dim=DIM)
rng = np.random.default_rng(0)
for topic, words in vocab.items():
    save_adapter(
        make_topic_adapter(topic, model.signature, rank=4),
        os.path.join(adapters_dir, f"{topic}.acadapter"),
    )
    text = " ".join(rng.choice(words, size=60))
    for chunk in chunk_document(text, 20, doc_id=f"{topic}-doc"):
        store.insert(EmbeddedChunk(chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=topic))
store.save(os.path.join(root, "store.acstore"))
PermissionRegistry().save(os.path.join(root, "perms.acperm"))

service = Service(
    ServiceConfig(
        listen="127.0.0.1:0",
        model=os.path.join(root, "model.acmodel"),
        store=os.path.join(root, "store.acstore"),
        adapters_dir=adapters_dir,
        permissions=os.path.join(root, "perms.acperm"),
        embedder={"builtin": {"dim": DIM, "seed": 0}},
        admin_token="demo-token",
    )
)
service.start()
base = f"http://127.0.0.1:{service.port}"
print("serving on", base)


def call(method, path, body=None, token=None):
    data = json.dumps(body).encode() if body is not None else None
    headers = {"Content-Type": "application/json"}
    if token:
        headers["X-Admin-Token"] = token
    req = urllib.request.Request(base + path, data=data, method=method, headers=headers)
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


query = {"user_id": "riley", "query": " ".join(vocab["research"][:4])}
first = call("POST", "/v1/query", query)
print("\nno grants yet -> active:", first["active"], "hints:", [h["id"] for h in first["hints"]])

call("PUT", "/v1/admin/permissions/riley", {"grants": ["research"]}, token="demo-token")
second = call("POST", "/v1/query", query)
print("after granting research -> active:", [(a["id"], round(a["weight"], 3)) for a in second["active"]])

audit = call(
    "POST",
    "/v1/audit/memorization",
    {"prediction": store.document_text("research-doc"), "training_ids": ["research-doc"], "n": 4},
)
print("\nself-audit of an ingested doc -> relative:", audit["relative"])

metrics = call("GET", "/v1/metrics")
print("metrics:", json.dumps(metrics["ttft_ms_histogram"]))

service.stop()
