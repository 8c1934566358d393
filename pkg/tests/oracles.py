"""Independent oracles the implementation is checked against.

Deliberately built on different algorithms than the package: quadratic
dynamic programming instead of suffix structures, full sorts instead of
incremental scans, forward-mode tangents instead of finite differences.
"""

from __future__ import annotations

import numpy as np


def dp_maximal_matches(p: list[str], s: list[str], n: int) -> list[tuple[int, int, int]]:
    """All maximal common word runs >= n via the O(|p|*|s|) LCSuf table.

    dp[i][j] is the longest common suffix of p[:i+1] and s[:j+1]; a run
    ending at (i, j) is maximal when it cannot extend right and is taken
    at its full leftward extension.
    """
    m, k = len(p), len(s)
    if m == 0 or k == 0:
        return []
    vocab: dict[str, int] = {}
    pid = np.array([vocab.setdefault(t, len(vocab)) for t in p], dtype=np.int64)
    sid = np.array([vocab.setdefault(t, len(vocab)) for t in s], dtype=np.int64)
    eq = pid[:, None] == sid[None, :]
    dp = np.zeros((m, k), dtype=np.int64)
    dp[0] = eq[0]
    for i in range(1, m):
        row = np.zeros(k, dtype=np.int64)
        row[0] = eq[i, 0]
        row[1:] = np.where(eq[i, 1:], dp[i - 1, :-1] + 1, 0)
        dp[i] = row
    right_maximal = np.ones((m, k), dtype=bool)
    right_maximal[: m - 1, : k - 1] = ~eq[1:, 1:]
    ends = np.argwhere((dp >= n) & right_maximal)
    out = []
    for i, j in ends:
        length = int(dp[i, j])
        out.append((int(i) - length + 1, int(j) - length + 1, length))
    out.sort()
    return out


def dp_prediction_coverage(p: list[str], training: list[list[str]], n: int) -> set[int]:
    """Prediction positions covered by any >= n overlap, per the DP oracle."""
    covered: set[int] = set()
    for s in training:
        for a, _b, length in dp_maximal_matches(p, s, n):
            covered.update(range(a, a + length))
    return covered


def brute_force_search(rows, q_values: np.ndarray, fetch_k: int, allowed_tags=None):
    """Full-sort retrieval oracle over (handle, tag, vector) rows."""
    scored = []
    for position, (handle, tag, vec) in enumerate(rows):
        if allowed_tags is not None and tag not in allowed_tags:
            continue
        scored.append((handle, tag, float(np.dot(vec, q_values)), position))
    scored.sort(key=lambda item: (-item[2], item[3]))
    return [(handle, tag, score) for handle, tag, score, _ in scored[:fetch_k]]


def mixed_forward_tangent(model, x: np.ndarray, plan, direction: list[float]):
    """Forward-mode directional derivative of forward_mixed w.r.t. the weights.

    `direction` gives dS_i for each plan entry; returns (output, d_output).
    """
    h = np.asarray(x, dtype=np.float64)
    u = np.zeros_like(h)
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = W @ h + b
        uz = W @ u
        for (adapter, weight), d_weight in zip(plan.entries, direction):
            delta = adapter.delta_for(i)
            if delta is not None:
                low = delta.A @ h
                z = z + (weight * adapter.scale) * (delta.B @ low)
                uz = uz + (weight * adapter.scale) * (delta.B @ (delta.A @ u))
                uz = uz + (d_weight * adapter.scale) * (delta.B @ low)
        if i != last:
            t = np.tanh(z)
            u = (1.0 - t * t) * uz
            h = t
        else:
            h = z
            u = uz
    return h, u


def active_hint_oracle(
    scored_rows,
    grants: set[str],
    registry_ids: set[str],
    hintable: dict[str, bool],
    k: int,
    threshold: float,
):
    """Set-algebra oracle for the query pipeline's active/hint partition.

    `scored_rows` are (tag, score) for every chunk, already sorted the way
    the store sorts (score desc, insertion order). Returns (active ids with
    weights, hint ids in score order).
    """
    permitted_topk = [(t, sc) for t, sc in scored_rows if t in grants][:k]
    sums: dict[str, list[float]] = {}
    for tag, score in permitted_topk:
        sums.setdefault(tag, []).append(score)
    aggregates = {tag: sum(v) / len(v) for tag, v in sums.items()}
    survivors = {
        tag: max(score, 0.0)
        for tag, score in aggregates.items()
        if score >= threshold and tag in registry_ids
    }
    total = sum(survivors.values())
    active = {tag: score / total for tag, score in survivors.items()} if total > 0 else {}

    open_topk = scored_rows[:k]
    sums = {}
    for tag, score in open_topk:
        sums.setdefault(tag, []).append(score)
    open_aggregates = {tag: sum(v) / len(v) for tag, v in sums.items()}
    hints = [
        tag
        for tag, _ in sorted(open_aggregates.items(), key=lambda kv: -kv[1])
        if tag not in grants and tag in registry_ids and hintable.get(tag, False)
    ]
    return active, hints
