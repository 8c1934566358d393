"""Query orchestration: embed, retrieve, filter by permission, mix, hint.

The response path and the hint path run separate store searches:

  * active set: a permission-filtered search (the store only scores
    chunks the user may access), top-k chunks kept, scores averaged per
    adapter, threshold applied, weights normalized over what survives.
    The response is therefore a function of the user's grants and the
    permitted adapters alone; documents the user cannot access never
    influence it, not even by crowding the top-k.
  * hint set: an unfiltered search over the same query; candidates the
    user lacks, restricted to hintable adapters, sorted by score.

With hints disabled only the filtered search runs.

Permission decisions depend on user_id and store tags only, never on the
query text, so adversarial prompts cannot widen a grant set.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .adapters import AdapterRegistry
from .embedding import tokenize
from .errors import EmptyInput, InvalidConfig, UnknownEmbedderDim
from .model import MixPlan, ReferenceModel
from .permissions import PermissionRegistry, partition
from .store import ScoredChunk, VectorStore

TTFT_BUCKET_EDGES_MS = (1.0, 5.0, 25.0)
TTFT_BUCKET_LABELS = ("[0,1)", "[1,5)", "[5,25)", "[25,inf)")


@dataclass(frozen=True)
class RetrievalConfig:
    """Retrieval knobs: chunks fetched, chunks kept, adapter score cutoff."""

    fetch_k: int = 10
    k: int = 3
    threshold: float = 0.0
    hints_enabled: bool = True

    def __post_init__(self):
        if self.fetch_k < 1 or self.k < 1:
            raise InvalidConfig("fetch_k and k must be >= 1")
        if self.k > self.fetch_k:
            raise InvalidConfig(f"k ({self.k}) must not exceed fetch_k ({self.fetch_k})")
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidConfig(f"threshold {self.threshold} outside [0, 1]")


@dataclass
class QueryOutcome:
    response: np.ndarray
    trace: str
    active: list[tuple[str, float]]
    hints: list[tuple[str, dict]]
    timing: dict[str, float]


def aggregate_scores(scored_chunks: Sequence[ScoredChunk]) -> dict[str, float]:
    """Mean chunk score per adapter, keyed in first-appearance order."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for sc in scored_chunks:
        sums[sc.adapter_tag] = sums.get(sc.adapter_tag, 0.0) + sc.score
        counts[sc.adapter_tag] = counts.get(sc.adapter_tag, 0) + 1
    return {tag: sums[tag] / counts[tag] for tag in sums}


def build_plan(
    candidates: Mapping[str, float], threshold: float, registry: AdapterRegistry
) -> MixPlan:
    """Normalize candidate scores into mixing weights.

    Candidates below the threshold are dropped; if nothing positive
    survives the base model answers (empty plan). Negative survivor scores
    clamp to zero before normalizing so weights stay valid mixture
    coefficients. Candidates whose adapter is no longer registered are
    skipped (stale store tags).
    """
    survivors = [
        (adapter_id, max(score, 0.0))
        for adapter_id, score in candidates.items()
        if score >= threshold and adapter_id in registry
    ]
    total = sum(score for _, score in survivors)
    if not survivors or total <= 0.0:
        return MixPlan.empty()
    return MixPlan(
        tuple((registry.get(adapter_id), score / total) for adapter_id, score in survivors)
    )


class MetricsRecorder:
    """Query counters and a TTFT histogram per active-adapter-count bucket."""

    def __init__(self):
        self._lock = threading.Lock()
        self.queries_total = 0
        self.hints_total = 0
        self._histogram: dict[str, list[int]] = {}

    def record(self, active_count: int, hint_count: int, ttft_ms: float) -> None:
        bin_idx = 0
        for edge in TTFT_BUCKET_EDGES_MS:
            if ttft_ms >= edge:
                bin_idx += 1
        with self._lock:
            self.queries_total += 1
            self.hints_total += hint_count
            bucket = self._histogram.setdefault(str(active_count), [0, 0, 0, 0])
            bucket[bin_idx] += 1

    def as_dict(self) -> dict:
        with self._lock:
            return {
                "queries_total": self.queries_total,
                "hints_total": self.hints_total,
                "ttft_ms_bucket_labels": list(TTFT_BUCKET_LABELS),
                "ttft_ms_histogram": {k: list(v) for k, v in self._histogram.items()},
            }


class QueryPipeline:
    def __init__(
        self,
        embedder,
        store: VectorStore,
        permissions: PermissionRegistry,
        adapters: AdapterRegistry,
        model: ReferenceModel,
        defaults: RetrievalConfig | None = None,
        metrics: MetricsRecorder | None = None,
    ):
        self.embedder = embedder
        self.store = store
        self.permissions = permissions
        self.adapters = adapters
        self.model = model
        self.defaults = defaults or RetrievalConfig()
        self.metrics = metrics or MetricsRecorder()

    def query(self, user_id: str, text: str, config: RetrievalConfig | None = None) -> QueryOutcome:
        grants = self.permissions.lookup(user_id)
        return self._run(grants, text, config)

    def hint_rerun(
        self, user_id: str, text: str, config: RetrievalConfig | None, granted: str
    ) -> QueryOutcome:
        """Re-query as if `granted` had been added to the user's vector.

        Evaluates with grants ∪ {granted} without persisting the widened
        set; callers that want the grant to stick update the permission
        registry themselves.
        """
        grants = self.permissions.lookup(user_id)
        grants.add(granted)
        return self._run(grants, text, config)

    def candidates(self, text: str, config: RetrievalConfig | None = None) -> dict[str, float]:
        """Unfiltered candidate adapters with aggregate scores (top-k chunks)."""
        config = config or self.defaults
        q = self._embed(text)
        hits = self.store.search(q, config.fetch_k, allowed_tags=None)
        return aggregate_scores(hits[: config.k])

    def _embed(self, text: str):
        if not tokenize(text):
            raise EmptyInput("query has no tokens")
        q = self.embedder.embed(text)
        if q.dim != self.model.input_dim:
            raise UnknownEmbedderDim(
                f"embedder dim {q.dim} does not match model input dim {self.model.input_dim}"
            )
        return q

    def _run(self, grants: set[str], text: str, config: RetrievalConfig | None) -> QueryOutcome:
        config = config or self.defaults
        t0 = time.perf_counter()
        q = self._embed(text)
        t_embed = time.perf_counter()

        permitted_hits = self.store.search(q, config.fetch_k, allowed_tags=grants)
        permitted_candidates = aggregate_scores(permitted_hits[: config.k])
        hints: list[tuple[str, dict]] = []
        if config.hints_enabled:
            open_hits = self.store.search(q, config.fetch_k, allowed_tags=None)
            open_candidates = aggregate_scores(open_hits[: config.k])
            _, denied = partition(open_candidates, grants)
            for adapter_id, _score in sorted(denied.items(), key=lambda kv: -kv[1]):
                if adapter_id in self.adapters:
                    adapter = self.adapters.get(adapter_id)
                    if adapter.hintable:
                        hints.append((adapter_id, dict(adapter.metadata)))
        t_retrieve = time.perf_counter()

        plan = build_plan(permitted_candidates, config.threshold, self.adapters)
        response = self.model.forward_mixed(q.values, plan)
        ttft_ms = (time.perf_counter() - t0) * 1000.0

        active = [(adapter.id, weight) for adapter, weight in plan.entries]
        trace = self._trace(active, hints)
        self.metrics.record(len(active), len(hints), ttft_ms)
        return QueryOutcome(
            response=response,
            trace=trace,
            active=active,
            hints=hints,
            timing={
                "embed_ms": (t_embed - t0) * 1000.0,
                "retrieve_ms": (t_retrieve - t_embed) * 1000.0,
                "ttft_ms": ttft_ms,
            },
        )

    @staticmethod
    def _trace(active: list[tuple[str, float]], hints: list[tuple[str, dict]]) -> str:
        if active:
            mix = ", ".join(f"{adapter_id}:{weight:.4f}" for adapter_id, weight in active)
            head = f"mixed adapters [{mix}]"
        else:
            head = "base model (no permitted adapter retrieved)"
        if hints:
            head += "; hints: " + ", ".join(adapter_id for adapter_id, _ in hints)
        return head
