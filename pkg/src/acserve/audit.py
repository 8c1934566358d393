"""Verbatim-memorization scoring over word tokens.

Finds every maximal common substring (>= n consecutive words) between a
prediction and each training entry, unions the prediction-side intervals
into a global coverage set, and reports an absolute score (words covered)
and a relative score (fraction of the prediction covered). Comparisons are
exact on raw whitespace tokens; nothing is lowercased or stemmed.

The matcher builds a generalized suffix array over the two token sequences
joined by a sentinel, derives the LCP array (Kasai), and walks the virtual
suffix tree induced by LCP intervals. At each internal node, suffixes from
the two sides are cross-paired bucketed by preceding token, which emits
exactly the occurrences that cannot be extended left or right. Match pairs
of length >= n are the output; construction is O(N log^2 N) and emission is
output-bound.

Merging scores across several predictions of one query deduplicates on
training-side intervals: prediction-side indices are not comparable across
different generated texts, so captured training spans are counted once.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyPrediction

DEFAULT_N_VALUES = (8, 12, 15, 18)


@dataclass(frozen=True, order=True)
class WordInterval:
    """Inclusive word-index interval [start, end]."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad interval [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def union_intervals(intervals: Iterable[WordInterval]) -> list[WordInterval]:
    """Union into disjoint intervals; adjacent intervals coalesce."""
    merged: list[WordInterval] = []
    for iv in sorted(intervals):
        if merged and iv.start <= merged[-1].end + 1:
            if iv.end > merged[-1].end:
                merged[-1] = WordInterval(merged[-1].start, iv.end)
        else:
            merged.append(iv)
    return merged


def covered_words(intervals: Iterable[WordInterval]) -> int:
    return sum(iv.length for iv in intervals)


def _suffix_array(seq: Sequence[int]) -> list[int]:
    """Prefix-doubling suffix array over integer tokens."""
    n = len(seq)
    if n == 0:
        return []
    sa = sorted(range(n), key=lambda i: seq[i])
    rank = [0] * n
    r = -1
    prev = None
    for i in sa:
        if seq[i] != prev:
            r += 1
            prev = seq[i]
        rank[i] = r
    k = 1
    while k < n and rank[sa[-1]] < n - 1:
        def key(i, _k=k, _rank=rank, _n=n):
            return (_rank[i], _rank[i + _k] if i + _k < _n else -1)

        sa.sort(key=key)
        new_rank = [0] * n
        for j in range(1, n):
            new_rank[sa[j]] = new_rank[sa[j - 1]] + (1 if key(sa[j]) != key(sa[j - 1]) else 0)
        rank = new_rank
        k <<= 1
    return sa


def _lcp_array(seq: Sequence[int], sa: list[int]) -> list[int]:
    """Kasai: lcp[i] = common-prefix length of suffixes sa[i-1] and sa[i]."""
    n = len(seq)
    pos = [0] * n
    for i, s in enumerate(sa):
        pos[s] = i
    lcp = [0] * n
    h = 0
    for i in range(n):
        if pos[i] > 0:
            j = sa[pos[i] - 1]
            while i + h < n and j + h < n and seq[i + h] == seq[j + h]:
                h += 1
            lcp[pos[i]] = h
            if h:
                h -= 1
        else:
            h = 0
    return lcp


def _cross_pairs(acc: dict, child: dict, depth: int, out: list) -> None:
    # Pair p-side suffixes with s-side suffixes whose preceding tokens differ
    # (or hit a text boundary): those pairs cannot be extended left, and the
    # node depth is exactly their common-prefix length, so they are maximal.
    for (side_a, prev_a), starts_a in acc.items():
        for (side_b, prev_b), starts_b in child.items():
            if side_a == side_b:
                continue
            if prev_a is not None and prev_b is not None and prev_a == prev_b:
                continue
            if side_a == 0:
                for a in starts_a:
                    for b in starts_b:
                        out.append((a, b, depth))
            else:
                for b in starts_a:
                    for a in starts_b:
                        out.append((a, b, depth))


def _merge_bucket(dst: dict, src: dict) -> None:
    for key, starts in src.items():
        if key in dst:
            dst[key].extend(starts)
        else:
            dst[key] = starts


def _maximal_matches(p_ids: list[int], s_ids: list[int], n: int) -> list[tuple[int, int, int]]:
    """All maximal match occurrences as (p_start, s_start, length), length >= n."""
    if not p_ids or not s_ids:
        return []
    sep = 0  # token ids start at 1
    text = p_ids + [sep] + s_ids
    total = len(text)
    p_len = len(p_ids)
    sa = _suffix_array(text)
    lcp = _lcp_array(text, sa)

    def leaf_bucket(x: int) -> dict:
        if x < p_len:
            prev = p_ids[x - 1] if x > 0 else None
            return {(0, prev): [x]}
        if x == p_len:
            return {}
        b = x - p_len - 1
        prev = s_ids[b - 1] if b > 0 else None
        return {(1, prev): [b]}

    out: list[tuple[int, int, int]] = []
    stack: list[list] = []  # [depth, bucket], strictly increasing depth
    for i in range(total):
        x = sa[i]
        h = lcp[i] if i else 0
        carry = None
        while stack and stack[-1][0] > h:
            depth_f, bucket_f = stack.pop()
            if carry is not None:
                if depth_f >= n:
                    _cross_pairs(bucket_f, carry, depth_f, out)
                _merge_bucket(bucket_f, carry)
            carry = bucket_f
        if carry is not None:
            if stack and stack[-1][0] == h:
                if h >= n:
                    _cross_pairs(stack[-1][1], carry, h, out)
                _merge_bucket(stack[-1][1], carry)
            else:
                stack.append([h, carry])
        stack.append([total - x, leaf_bucket(x)])
    carry = None
    while stack:
        depth_f, bucket_f = stack.pop()
        if carry is not None:
            if depth_f >= n:
                _cross_pairs(bucket_f, carry, depth_f, out)
            _merge_bucket(bucket_f, carry)
        carry = bucket_f
    return out


def _token_ids(p: Sequence[str], s: Sequence[str]) -> tuple[list[int], list[int]]:
    vocab: dict[str, int] = {}
    def ids(tokens):
        result = []
        for tok in tokens:
            idx = vocab.get(tok)
            if idx is None:
                idx = len(vocab) + 1  # 0 is the sentinel
                vocab[tok] = idx
            result.append(idx)
        return result

    return ids(p), ids(s)


def common_substrings(
    p: Sequence[str], s: Sequence[str], n: int
) -> list[tuple[WordInterval, WordInterval]]:
    """Every maximal common substring occurrence of >= n words.

    Each occurrence is reported once at its maximal extent as a pair of
    intervals (prediction side, training side), ordered by prediction
    start then training start. Substrings contained in a reported
    occurrence are not listed separately.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p_ids, s_ids = _token_ids(p, s)
    matches = _maximal_matches(p_ids, s_ids, n)
    matches.sort()
    return [
        (WordInterval(a, a + length - 1), WordInterval(b, b + length - 1))
        for a, b, length in matches
    ]


@dataclass
class OverlapReport:
    """Memorization coverage of one prediction against a training corpus.

    `training_intervals` holds, per training entry, the union of captured
    spans on that entry's side; cross-prediction merging counts those spans
    once (see merge_predictions).
    """

    prediction_id: str
    global_intervals: list[WordInterval]
    absolute: int
    relative: float
    training_intervals: list[list[WordInterval]]

    @property
    def interval_count(self) -> int:
        return len(self.global_intervals)


def score_prediction(
    p: Sequence[str],
    training: Sequence[Sequence[str]],
    n: int,
    prediction_id: str = "",
) -> OverlapReport:
    """Union the >= n-word overlaps of `p` with every training entry."""
    if not p:
        raise EmptyPrediction("prediction has no tokens")
    p_side: list[WordInterval] = []
    training_intervals: list[list[WordInterval]] = []
    for entry in training:
        pairs = common_substrings(p, entry, n)
        p_side.extend(pi for pi, _ in pairs)
        training_intervals.append(union_intervals(si for _, si in pairs))
    global_intervals = union_intervals(p_side)
    absolute = covered_words(global_intervals)
    return OverlapReport(
        prediction_id=prediction_id,
        global_intervals=global_intervals,
        absolute=absolute,
        relative=absolute / len(p),
        training_intervals=training_intervals,
    )


def merge_predictions(reports: Sequence[OverlapReport]) -> int:
    """Distinct captured training words across predictions of one query.

    Spans captured by several predictions (fully or partially overlapping)
    are counted once. All reports must target the same training set.
    """
    if not reports:
        return 0
    counts = {len(r.training_intervals) for r in reports}
    if len(counts) != 1:
        raise ValueError("reports were scored against different training sets")
    cumulative = 0
    for entry_idx in range(counts.pop()):
        spans = [iv for r in reports for iv in r.training_intervals[entry_idx]]
        cumulative += covered_words(union_intervals(spans))
    return cumulative


def _score_task(args) -> list[dict]:
    prediction_id, tokens, training, n_values = args
    rows = []
    for n in n_values:
        report = score_prediction(tokens, training, n, prediction_id=prediction_id)
        rows.append(
            {
                "prediction_id": prediction_id,
                "n": n,
                "absolute": report.absolute,
                "relative": report.relative,
                "interval_count": report.interval_count,
                "intervals": [(iv.start, iv.end) for iv in report.global_intervals],
            }
        )
    return rows


def audit_corpus(
    predictions: Sequence[tuple[str, Sequence[str]]],
    training: Sequence[Sequence[str]],
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    workers: int | None = None,
) -> list[dict]:
    """Score every prediction at every n; rows ordered (prediction, n).

    `workers` > 1 shards the prediction list across processes; assembly
    order is deterministic either way.
    """
    training = [list(t) for t in training]
    tasks = [(pid, list(tokens), training, tuple(n_values)) for pid, tokens in predictions]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(_score_task, tasks))
    else:
        grouped = [_score_task(task) for task in tasks]
    return [row for rows in grouped for row in rows]


def read_jsonl(path) -> list[tuple[str, str]]:
    """Read {"id": ..., "text": ...} records, one JSON object per line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append((str(obj["id"]), obj["text"]))
    return records


def write_csv(rows: Sequence[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["prediction_id", "n", "absolute", "relative", "interval_count"])
    for row in rows:
        writer.writerow(
            [row["prediction_id"], row["n"], row["absolute"], row["relative"], row["interval_count"]]
        )


def write_json_report(rows: Sequence[dict], fh) -> None:
    json.dump({"results": list(rows)}, fh, indent=2)
    fh.write("\n")
