"""Deterministic reference model and the three adapter-forward strategies.

The model is a dense stack (W x + b per layer, tanh between layers, none
after the last). Adapter deltas enter at pre-activation, so per-layer
similarity-weighted output mixing

    y = W h + b + sum_i S_i * (alpha_i/r_i) * B_i (A_i h)

is exactly equivalent (up to float reassociation) to forwarding through a
model whose weights were merged as W + sum_i S_i * (alpha_i/r_i) * B_i A_i.
The output-averaging baseline is mixing with uniform weights.

Initialization uses a documented xorshift64* generator and quantizes every
weight to float32 precision, so `.acmodel` files (float32 blobs) round-trip
bit-exactly and golden outputs reproduce across platforms. All arithmetic
runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapters import LowRankAdapter, _quantize
from .errors import DimensionMismatch, InvalidPlan, ShapeMismatch
from .persist import MAGIC_MODEL, matrix_from_bytes, matrix_to_bytes, read_container, write_container

MODEL_FORMAT_VERSION = 1
PLAN_WEIGHT_TOL = 1e-9

_MASK64 = (1 << 64) - 1
_XORSHIFT_MULT = 2685821657736338717


class XorShift64Star:
    """xorshift64*: s ^= s>>12; s ^= s<<25; s ^= s>>27; out = s * M >> 11.

    Tiny, seedable, platform-independent; used only for reproducible
    weight initialization, not for anything statistical.
    """

    def __init__(self, seed: int):
        self._state = (seed ^ 0x9E3779B97F4A7C15) & _MASK64 or 0x2545F4914F6CDD1D

    def next_u64(self) -> int:
        s = self._state
        s ^= (s >> 12) & _MASK64
        s = (s ^ (s << 25)) & _MASK64
        s ^= (s >> 27) & _MASK64
        self._state = s
        return (s * _XORSHIFT_MULT) & _MASK64

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * (self.next_u64() >> 11) / float(1 << 53)

    def matrix(self, rows: int, cols: int, scale: float) -> np.ndarray:
        out = np.empty((rows, cols), dtype=np.float64)
        for i in range(rows):
            for j in range(cols):
                out[i, j] = self.uniform(-scale, scale)
        return out


@dataclass(frozen=True)
class MixPlan:
    """Adapters to mix with their normalized weights (sum = 1, all >= 0)."""

    entries: tuple[tuple[LowRankAdapter, float], ...]

    def __post_init__(self):
        entries = tuple((a, float(w)) for a, w in self.entries)
        if entries:
            weights = [w for _, w in entries]
            if any(not np.isfinite(w) or w < 0.0 for w in weights):
                raise InvalidPlan("mixing weights must be finite and non-negative")
            total = sum(weights)
            if abs(total - 1.0) > PLAN_WEIGHT_TOL:
                raise InvalidPlan(f"mixing weights sum to {total}, expected 1")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def empty(cls) -> "MixPlan":
        return cls(entries=())

    @property
    def is_empty(self) -> bool:
        return not self.entries


class ReferenceModel:
    """Dense layer stack with tanh between layers (not after the last)."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], seed: int | None = None):
        if len(weights) != len(biases) or not weights:
            raise ShapeMismatch("need one bias per weight matrix, at least one layer")
        self.weights = [_quantize(W) for W in weights]
        self.biases = [_quantize(b) for b in biases]
        self.seed = seed
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.ndim != 1 or b.shape[0] != W.shape[0]:
                raise ShapeMismatch(f"layer {i}: W {W.shape} and b {b.shape} disagree")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite weights")
            if i > 0 and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeMismatch(
                    f"layer {i} input dim {W.shape[1]} != layer {i-1} output dim {self.weights[i-1].shape[0]}"
                )

    @property
    def signature(self) -> list[tuple[int, int]]:
        return [(W.shape[1], W.shape[0]) for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @classmethod
    def seeded(cls, signature: list[tuple[int, int]], seed: int = 0) -> "ReferenceModel":
        """Deterministic model over `signature` = [(d_in, d_out), ...]."""
        gen = XorShift64Star(seed)
        weights, biases = [], []
        for d_in, d_out in signature:
            scale = 1.0 / np.sqrt(d_in)
            weights.append(gen.matrix(d_out, d_in, scale))
            biases.append(gen.matrix(1, d_out, scale)[0])
        return cls(weights, biases, seed=seed)

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise DimensionMismatch(f"input dim {x.shape}, model expects {self.input_dim}")
        return x

    def forward_base(self, x) -> np.ndarray:
        """Forward with no adapters."""
        h = self._check_input(x)
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = W @ h + b
            if i != last:
                h = np.tanh(h)
        return h

    def forward_mixed(self, x, plan: MixPlan) -> np.ndarray:
        """Forward with per-layer pre-activation adapter mixing.

        The empty plan reduces bit-identically to `forward_base`. Output
        depends only on base weights and the adapters in the plan.
        """
        if plan.is_empty:
            return self.forward_base(x)
        for adapter, _ in plan.entries:
            for delta in adapter.deltas:
                if delta.layer_index >= len(self.weights):
                    raise ShapeMismatch(
                        f"adapter {adapter.id} adapts layer {delta.layer_index}, model depth {len(self.weights)}"
                    )
                d_in, d_out = self.signature[delta.layer_index]
                if (delta.d_in, delta.d_out) != (d_in, d_out):
                    raise ShapeMismatch(
                        f"adapter {adapter.id} layer {delta.layer_index}: {delta.d_in}->{delta.d_out}, "
                        f"model layer is {d_in}->{d_out}"
                    )
        h = self._check_input(x)
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            h_next = W @ h + b
            for adapter, weight in plan.entries:
                delta = adapter.delta_for(i)
                if delta is not None:
                    h_next = h_next + (weight * adapter.scale) * (delta.B @ (delta.A @ h))
            h = np.tanh(h_next) if i != last else h_next
        return h

    def forward_avg(self, x, adapters: list[LowRankAdapter]) -> np.ndarray:
        """Output-averaging baseline: uniform weights 1/n over `adapters`."""
        if not adapters:
            return self.forward_base(x)
        weight = 1.0 / len(adapters)
        return self.forward_mixed(x, MixPlan(tuple((a, weight) for a in adapters)))

    def save(self, path) -> None:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(matrix_to_bytes(W))
            parts.append(matrix_to_bytes(b))
        manifest = {
            "format_version": MODEL_FORMAT_VERSION,
            "signature": [[d_in, d_out] for d_in, d_out in self.signature],
            "nonlinearity": "tanh",
            "seed": self.seed,
        }
        write_container(path, MAGIC_MODEL, manifest, b"".join(parts))

    @classmethod
    def load(cls, path) -> "ReferenceModel":
        manifest, blob = read_container(path, MAGIC_MODEL, MODEL_FORMAT_VERSION)
        weights, biases = [], []
        offset = 0
        for d_in, d_out in manifest["signature"]:
            W, offset = matrix_from_bytes(blob, offset, (d_out, d_in))
            b, offset = matrix_from_bytes(blob, offset, (d_out,))
            weights.append(W)
            biases.append(b)
        return cls(weights, biases, seed=manifest.get("seed"))


def merge_weights(
    model: ReferenceModel, adapters: list[LowRankAdapter], weights: list[float]
) -> ReferenceModel:
    """Materialize W + sum_i w_i * (alpha_i/r_i) * B_i A_i as a new model."""
    if len(adapters) != len(weights):
        raise ShapeMismatch("one weight per adapter required")
    if adapters:
        total = float(sum(weights))
        if abs(total - 1.0) > PLAN_WEIGHT_TOL:
            raise InvalidPlan(f"merge weights sum to {total}, expected 1")
    merged = [W.copy() for W in model.weights]
    for adapter, weight in zip(adapters, weights):
        for delta in adapter.deltas:
            if delta.layer_index >= len(merged):
                raise ShapeMismatch(
                    f"adapter {adapter.id} adapts layer {delta.layer_index}, model depth {len(merged)}"
                )
            if (delta.d_in, delta.d_out) != model.signature[delta.layer_index]:
                raise ShapeMismatch(
                    f"adapter {adapter.id} layer {delta.layer_index} does not fit the model signature"
                )
            merged[delta.layer_index] = merged[delta.layer_index] + (
                weight * adapter.scale
            ) * (delta.B @ delta.A)
    return ReferenceModel(merged, [b.copy() for b in model.biases])


class SingleHeadAttention:
    """One attention head behind a flag, for shape-generality checks only.

    Four square projections (q, k, v, out) over dimension `dim`, adaptable
    at layer indices 0..3 with the same pre-projection delta rule as the
    dense stack. Operates on a sequence X of shape (T, dim).
    """

    PROJECTIONS = ("q", "k", "v", "out")

    def __init__(self, dim: int, seed: int = 0):
        gen = XorShift64Star(seed)
        scale = 1.0 / np.sqrt(dim)
        self.dim = dim
        self.proj = [_quantize(gen.matrix(dim, dim, scale)) for _ in self.PROJECTIONS]

    @property
    def signature(self) -> list[tuple[int, int]]:
        return [(self.dim, self.dim)] * 4

    def _project(self, idx: int, X: np.ndarray, plan: MixPlan) -> np.ndarray:
        out = X @ self.proj[idx].T
        for adapter, weight in plan.entries:
            delta = adapter.delta_for(idx)
            if delta is not None:
                out = out + (weight * adapter.scale) * ((X @ delta.A.T) @ delta.B.T)
        return out

    def forward(self, X, plan: MixPlan = MixPlan.empty()) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(f"expected (T, {self.dim}) input, got {X.shape}")
        q = self._project(0, X, plan)
        k = self._project(1, X, plan)
        v = self._project(2, X, plan)
        logits = (q @ k.T) / np.sqrt(self.dim)
        logits -= logits.max(axis=1, keepdims=True)
        attn = np.exp(logits)
        attn /= attn.sum(axis=1, keepdims=True)
        return self._project(3, attn @ v, plan)
