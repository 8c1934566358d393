"""Chunking, hash embeddings, and the tagged vector store.

Documents are split into fixed-size token windows, embedded to unit-norm
vectors, and inserted with the adapter tag that owns them. Search is an
exact cosine scan; the tag filter runs inside the store.
"""

from acserve import (
    Chunk,
    EmbeddedChunk,
    HashEmbedder,
    VectorStore,
    chunk_document,
    cosine,
)

# -- chunking ---------------------------------------------------------------

doc = " ".join(f"solar panel maintenance item{i}" for i in range(60))  # 240 words
chunks = chunk_document(doc, chunk_size=100, doc_id="solar-handbook")
print("chunk sizes:", [c.token_count for c in chunks])  # [100, 100, 40]

# -- embeddings ---------------------------------------------------------------

embedder = HashEmbedder(dim=256, seed=0)
a = embedder.embed("solar panel inverter sizing")
b = embedder.embed("solar panel inverter sizing guide")
c = embedder.embed("quarterly payroll tax filing")
print("related  cosine:", round(cosine(a, b), 3))
print("unrelated cosine:", round(cosine(a, c), 3))

# -- the store ----------------------------------------------------------------

store = VectorStore(dim=256)
for text, tag in [
    ("solar panel installation and inverter sizing", "energy"),
    ("panel cleaning schedule and inverter checks", "energy"),
    ("payroll tax filing deadlines for contractors", "finance"),
    ("quarterly tax estimates and payroll ledgers", "finance"),
]:
    for chunk in chunk_document(text, 100, doc_id=text[:12]):
        store.insert(EmbeddedChunk(chunk=chunk, embedding=embedder.embed(text), adapter_tag=tag))

query = embedder.embed("inverter sizing for solar installation")
print("\nunfiltered search:")
for hit in store.search(query, fetch_k=3):
    print(f"  {hit.adapter_tag:8s} score={hit.score:.3f}")

print("filtered to finance only:")
for hit in store.search(query, fetch_k=3, allowed_tags={"finance"}):
    print(f"  {hit.adapter_tag:8s} score={hit.score:.3f}")

# -- persistence ----------------------------------------------------------------

import tempfile, os

path = os.path.join(tempfile.mkdtemp(), "demo.acstore")
store.save(path)
reloaded = VectorStore.load(path)
print(f"\nround trip: {len(reloaded)} chunks, identical top hit:",
      reloaded.search(query, 1)[0].score == store.search(query, 1)[0].score)
