"""Access-control-aware low-rank adapter serving.

Documents are chunked and embedded into a tagged vector store; queries
retrieve candidate adapters by cosine similarity, pass through a per-user
permission vector, and the permitted adapters are mixed over a small
reference model with similarity-proportional weights; no trained router.
Relevant-but-forbidden adapters can surface as hints. A separate audit
toolkit quantifies verbatim training-data leakage in model outputs.
"""

from .adapters import (
    AdapterRegistry,
    EffectiveDelta,
    LowRankAdapter,
    LowRankLayerDelta,
    effective_delta,
    load_adapter,
    load_adapter_dir,
    save_adapter,
)
from .audit import (
    OverlapReport,
    WordInterval,
    audit_corpus,
    common_substrings,
    merge_predictions,
    score_prediction,
    union_intervals,
)
from .embedding import (
    DEFAULT_CHUNK_SIZE,
    Chunk,
    EmbeddingVector,
    HashEmbedder,
    RemoteEmbedder,
    chunk_document,
    cosine,
    tokenize,
)
from .errors import (
    AcServeError,
    CorruptFile,
    DimensionMismatch,
    DuplicateId,
    EmptyInput,
    EmptyPrediction,
    FormatVersionMismatch,
    InvalidConfig,
    InvalidPlan,
    LayerNotAdapted,
    ShapeMismatch,
    UnknownEmbedderDim,
    UnknownId,
)
from .model import MixPlan, ReferenceModel, SingleHeadAttention, merge_weights
from .permissions import PermissionRegistry, partition
from .pipeline import (
    MetricsRecorder,
    QueryOutcome,
    QueryPipeline,
    RetrievalConfig,
    aggregate_scores,
    build_plan,
)
from .store import EmbeddedChunk, ScoredChunk, VectorStore

__version__ = "0.1.0"

__all__ = [
    "AcServeError",
    "AdapterRegistry",
    "Chunk",
    "CorruptFile",
    "DEFAULT_CHUNK_SIZE",
    "DimensionMismatch",
    "DuplicateId",
    "EffectiveDelta",
    "EmbeddedChunk",
    "EmbeddingVector",
    "EmptyInput",
    "EmptyPrediction",
    "FormatVersionMismatch",
    "HashEmbedder",
    "InvalidConfig",
    "InvalidPlan",
    "LayerNotAdapted",
    "LowRankAdapter",
    "LowRankLayerDelta",
    "MetricsRecorder",
    "MixPlan",
    "OverlapReport",
    "PermissionRegistry",
    "QueryOutcome",
    "QueryPipeline",
    "ReferenceModel",
    "RemoteEmbedder",
    "RetrievalConfig",
    "ScoredChunk",
    "ShapeMismatch",
    "SingleHeadAttention",
    "UnknownEmbedderDim",
    "UnknownId",
    "VectorStore",
    "WordInterval",
    "aggregate_scores",
    "audit_corpus",
    "build_plan",
    "chunk_document",
    "common_substrings",
    "cosine",
    "effective_delta",
    "load_adapter",
    "load_adapter_dir",
    "merge_predictions",
    "merge_weights",
    "partition",
    "save_adapter",
    "score_prediction",
    "tokenize",
    "union_intervals",
]
