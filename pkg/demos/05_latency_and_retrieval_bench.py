"""Desk-scale reruns of the two serving benchmarks.

Latency: a fixed prompt, a growing grant set, so the active-adapter count
is the only moving part; medians should rise monotonically with the count.
Retrieval: five topics over disjoint vocabularies; every query should
retrieve its own topic and nothing else.
"""

import sys
import tempfile

from acserve.bench import (
    bench_latency,
    bench_retrieval,
    spearman_rho,
    write_latency_csv,
    write_retrieval_csv,
    write_synthetic_corpus,
)

print("== time to first token vs active adapters ==")
counts = list(range(1, 9))
rows = bench_latency(counts, repeats=30, warmup=5)
write_latency_csv(rows, sys.stdout)
rho = spearman_rho(counts, [r["median_ttft_ms"] for r in rows])
print(f"Spearman rho over the sweep: {rho:.3f}\n")

print("== retrieval accuracy over a 5-topic synthetic corpus ==")
corpus_dir = tempfile.mkdtemp(prefix="acserve-corpus-")
write_synthetic_corpus(corpus_dir, topics=5, docs_per_topic=4, queries_per_topic=20)
write_retrieval_csv(bench_retrieval(corpus_dir), sys.stdout)
print(f"(corpus written under {corpus_dir})")
