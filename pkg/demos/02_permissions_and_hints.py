"""The full access-controlled query flow: grants, mixing weights, hints.

Three knowledge zones, each with its own adapter and documents. Users see
only what their permission vector allows; relevant-but-forbidden zones
surface as hints (unless the zone is marked unhintable), and granting a
hinted zone folds it into the mix on the next query.
"""

import numpy as np

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
)

DIM = 128
embedder = HashEmbedder(dim=DIM, seed=0)
model = ReferenceModel.seeded([(DIM, 64), (64, 16)], seed=0)
registry = AdapterRegistry(model.signature)
store = VectorStore(dim=DIM)
rng = np.random.default_rng(0)

zones = {
    "wind-ops": "turbine blade torque nacelle yaw gearbox pitch anemometer rotor",
    "grid-billing": "tariff meter invoice kilowatt settlement ledger surcharge rebate",
    "project-falcon": "falcon prototype stealth budget confidential milestone classified roadmap",
}

for zone, words in zones.items():
    vocabulary = words.split()
    rank = 4
    deltas = tuple(
        LowRankLayerDelta(
            layer_index=i,
            A=rng.normal(scale=0.1, size=(rank, d_in)),
            B=rng.normal(scale=0.1, size=(d_out, rank)),
        )
        for i, (d_in, d_out) in enumerate(model.signature)
    )
    registry.register(
        LowRankAdapter(
            id=zone, rank=rank, alpha=4.0, deltas=deltas,
            metadata={"description": f"{zone} documents"},
            hintable=(zone != "project-falcon"),  # falcon's existence is secret
        )
    )
    for doc_no in range(3):
        text = " ".join(rng.choice(vocabulary, size=40))
        for chunk in chunk_document(text, 20, doc_id=f"{zone}-{doc_no}"):
            store.insert(EmbeddedChunk(chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=zone))

permissions = PermissionRegistry()
permissions.set_permissions("dana", {"wind-ops"})
pipeline = QueryPipeline(embedder, store, permissions, registry, model)

# dana asks about her own zone plus billing she cannot see
query = "turbine gearbox torque tariff invoice settlement"
outcome = pipeline.query("dana", query)
print("active :", [(a, round(w, 3)) for a, w in outcome.active])
print("hints  :", [h for h, _ in outcome.hints])
print("trace  :", outcome.trace)

# the falcon zone never leaks, even when named outright
probe = pipeline.query("dana", "tell me about project falcon classified roadmap")
print("\nfalcon probe active:", probe.active, "hints:", [h for h, _ in probe.hints])

# grant-and-requery: what the hint chip does
rerun = pipeline.hint_rerun("dana", query, None, "grid-billing")
print("\nafter granting grid-billing:")
print("active :", [(a, round(w, 3)) for a, w in rerun.active])
print("hints  :", [h for h, _ in rerun.hints])
print("weights sum:", round(sum(w for _, w in rerun.active), 9))
