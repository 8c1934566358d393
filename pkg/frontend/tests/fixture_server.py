"""Build a serving workspace for the console's end-to-end tests.

Usage: python3 fixture_server.py WORKDIR
Prints one JSON line: {"config": path, "vocab": {topic: [words]}, "admin_token": ...}.
The e2e test then starts the service with `acserve serve --config <path>`.
"""

import json
import os
import sys

import numpy as np

from acserve import (
    HashEmbedder,
    EmbeddedChunk,
    PermissionRegistry,
    ReferenceModel,
    VectorStore,
    chunk_document,
    save_adapter,
)
from acserve.bench import disjoint_vocabularies, make_topic_adapter

DIM = 64
TOPICS = ["alpha", "beta", "gamma"]
ADMIN_TOKEN = "console-e2e-token"


def main(root: str) -> None:
    os.makedirs(root, exist_ok=True)
    embedder = HashEmbedder(dim=DIM, seed=0)
    vocab = disjoint_vocabularies(embedder, TOPICS, 6)
    model = ReferenceModel.seeded([(DIM, 32), (32, 8)], seed=0)
    model_path = os.path.join(root, "model.acmodel")
    model.save(model_path)
    adapters_dir = os.path.join(root, "adapters")
    os.makedirs(adapters_dir, exist_ok=True)
    store = VectorStore(dim=DIM)
    rng = np.random.default_rng(0)
    for topic in TOPICS:
        save_adapter(
            make_topic_adapter(topic, model.signature, rank=4),
            os.path.join(adapters_dir, f"{topic}.acadapter"),
        )
        words = vocab[topic]
        for doc_no in range(2):
            text = " ".join(words[int(i)] for i in rng.integers(0, len(words), size=40))
            for chunk in chunk_document(text, 10, doc_id=f"{topic}-doc{doc_no}"):
                store.insert(
                    EmbeddedChunk(
                        chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=topic
                    )
                )
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
        "embedder": {"builtin": {"dim": DIM, "seed": 0}},
        "retrieval": {"fetch_k": 10, "k": 3, "threshold": 0.0, "hints_enabled": True},
        "metrics_enabled": True,
        "admin_token": ADMIN_TOKEN,
        "console_dir": os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "dist"),
    }
    config_path = os.path.join(root, "config.json")
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
    print(json.dumps({"config": config_path, "vocab": vocab, "admin_token": ADMIN_TOKEN}))


if __name__ == "__main__":
    main(sys.argv[1])
