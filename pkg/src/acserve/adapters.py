"""Low-rank adapters and their registry.

An adapter is a set of per-layer factor pairs (A: r x d_in, B: d_out x r)
with a rank r and scale alpha; the applied map is x -> (alpha/r) * B(Ax),
added to the layer's pre-activation output. The registry validates shapes
against a model signature and supports O(1) register/unregister; forwards
run against immutable snapshots, so removing an adapter never disturbs an
in-flight request or any other adapter's bytes.

Persistence (`.acadapter`): JSON manifest {format_version, id, r, alpha,
hintable, metadata, scaling, layers[{layer_index, d_in, d_out}]} plus
float32 blobs (A then B per layer) and a CRC32 trailer. Factor values are
quantized to float32 at construction so the round trip is lossless.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DuplicateId, LayerNotAdapted, ShapeMismatch, UnknownId
from .persist import MAGIC_ADAPTER, matrix_from_bytes, matrix_to_bytes, read_container, write_container

ADAPTER_FORMAT_VERSION = 1
_ID_PATTERN = re.compile(r"^[A-Za-z0-9_.-]+$")


def validate_adapter_id(adapter_id: str) -> str:
    if not _ID_PATTERN.match(adapter_id):
        raise ValueError(f"invalid adapter id {adapter_id!r}")
    return adapter_id


def _quantize(m) -> np.ndarray:
    """float64 array whose values are exactly float32-representable."""
    arr = np.asarray(m, dtype=np.float64).astype(np.float32).astype(np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LowRankLayerDelta:
    """Factor pair for one layer: A down-projects to rank r, B up-projects."""

    layer_index: int
    A: np.ndarray  # r x d_in
    B: np.ndarray  # d_out x r

    def __post_init__(self):
        if self.layer_index < 0:
            raise ValueError("layer_index must be >= 0")
        A = _quantize(self.A)
        B = _quantize(self.B)
        if A.ndim != 2 or B.ndim != 2:
            raise ShapeMismatch("A and B must be matrices")
        if A.shape[0] != B.shape[1]:
            raise ShapeMismatch(f"rank disagreement: A is {A.shape}, B is {B.shape}")
        r, d_in = A.shape
        d_out = B.shape[0]
        if r < 1 or r > min(d_in, d_out):
            raise ShapeMismatch(f"rank {r} outside [1, min({d_in}, {d_out})]")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    @property
    def d_in(self) -> int:
        return self.A.shape[1]

    @property
    def d_out(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True, eq=False)
class LowRankAdapter:
    id: str
    rank: int
    alpha: float
    deltas: tuple[LowRankLayerDelta, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)
    hintable: bool = True

    def __post_init__(self):
        validate_adapter_id(self.id)
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        deltas = tuple(self.deltas)
        seen = set()
        for delta in deltas:
            if delta.rank != self.rank:
                raise ShapeMismatch(
                    f"adapter {self.id}: layer {delta.layer_index} has rank {delta.rank}, adapter rank {self.rank}"
                )
            if delta.layer_index in seen:
                raise ValueError(f"adapter {self.id}: duplicate layer_index {delta.layer_index}")
            seen.add(delta.layer_index)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def delta_for(self, layer_index: int) -> LowRankLayerDelta | None:
        for delta in self.deltas:
            if delta.layer_index == layer_index:
                return delta
        return None

    def adapted_layers(self) -> list[int]:
        return sorted(d.layer_index for d in self.deltas)


@dataclass(frozen=True, eq=False)
class EffectiveDelta:
    """The materialized weight perturbation (alpha/r) * B @ A for one layer."""

    layer_index: int
    delta_w: np.ndarray


def effective_delta(adapter: LowRankAdapter, layer_index: int) -> EffectiveDelta:
    delta = adapter.delta_for(layer_index)
    if delta is None:
        raise LayerNotAdapted(f"adapter {adapter.id} does not adapt layer {layer_index}")
    return EffectiveDelta(layer_index=layer_index, delta_w=adapter.scale * (delta.B @ delta.A))


class AdapterRegistry:
    """Adapters keyed by id, shape-checked against a model signature."""

    def __init__(self, signature: list[tuple[int, int]]):
        self.signature = [(int(i), int(o)) for i, o in signature]
        self._lock = threading.RLock()
        self._adapters: dict[str, LowRankAdapter] = {}

    def _check_shapes(self, adapter: LowRankAdapter) -> None:
        for delta in adapter.deltas:
            if delta.layer_index >= len(self.signature):
                raise ShapeMismatch(
                    f"adapter {adapter.id}: layer_index {delta.layer_index} beyond model depth {len(self.signature)}"
                )
            d_in, d_out = self.signature[delta.layer_index]
            if (delta.d_in, delta.d_out) != (d_in, d_out):
                raise ShapeMismatch(
                    f"adapter {adapter.id}: layer {delta.layer_index} expects {d_in}->{d_out}, "
                    f"got {delta.d_in}->{delta.d_out}"
                )

    def register(self, adapter: LowRankAdapter) -> None:
        self._check_shapes(adapter)
        with self._lock:
            if adapter.id in self._adapters:
                raise DuplicateId(f"adapter {adapter.id} already registered")
            self._adapters[adapter.id] = adapter

    def unregister(self, adapter_id: str) -> None:
        with self._lock:
            if adapter_id not in self._adapters:
                raise UnknownId(f"adapter {adapter_id} not registered")
            del self._adapters[adapter_id]

    def get(self, adapter_id: str) -> LowRankAdapter:
        with self._lock:
            try:
                return self._adapters[adapter_id]
            except KeyError:
                raise UnknownId(f"adapter {adapter_id} not registered") from None

    def __contains__(self, adapter_id: str) -> bool:
        with self._lock:
            return adapter_id in self._adapters

    def __len__(self) -> int:
        with self._lock:
            return len(self._adapters)

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._adapters)

    def snapshot(self) -> dict[str, LowRankAdapter]:
        """Immutable view for a forward pass; later mutations don't affect it."""
        with self._lock:
            return dict(self._adapters)


def save_adapter(adapter: LowRankAdapter, path) -> None:
    parts = []
    layers = []
    for delta in adapter.deltas:
        parts.append(matrix_to_bytes(delta.A))
        parts.append(matrix_to_bytes(delta.B))
        layers.append({"layer_index": delta.layer_index, "d_in": delta.d_in, "d_out": delta.d_out})
    manifest = {
        "format_version": ADAPTER_FORMAT_VERSION,
        "id": adapter.id,
        "r": adapter.rank,
        "alpha": adapter.alpha,
        "hintable": adapter.hintable,
        "metadata": dict(adapter.metadata),
        "scaling": "alpha_over_r",
        "layers": layers,
    }
    write_container(path, MAGIC_ADAPTER, manifest, b"".join(parts))


def load_adapter(path) -> LowRankAdapter:
    manifest, blob = read_container(path, MAGIC_ADAPTER, ADAPTER_FORMAT_VERSION)
    rank = manifest["r"]
    deltas = []
    offset = 0
    for layer in manifest["layers"]:
        A, offset = matrix_from_bytes(blob, offset, (rank, layer["d_in"]))
        B, offset = matrix_from_bytes(blob, offset, (layer["d_out"], rank))
        deltas.append(LowRankLayerDelta(layer_index=layer["layer_index"], A=A, B=B))
    return LowRankAdapter(
        id=manifest["id"],
        rank=rank,
        alpha=manifest["alpha"],
        deltas=tuple(deltas),
        metadata=manifest.get("metadata", {}),
        hintable=manifest.get("hintable", True),
    )


def load_adapter_dir(dirpath) -> list[LowRankAdapter]:
    """Load every `.acadapter` file in a directory, sorted by filename."""
    import os

    adapters = []
    for name in sorted(os.listdir(dirpath)):
        if name.endswith(".acadapter"):
            adapters.append(load_adapter(os.path.join(dirpath, name)))
    return adapters
