"""Per-user permission vectors over registered adapters.

A user's grants are stored as an explicit set of adapter ids (the binary
vector of the permission database, keyed by id rather than position so
adapter churn never renumbers anyone). Unknown users resolve to the empty
set: the system fails closed. Stale grants naming deleted adapters are kept
verbatim; the pipeline intersects with live adapters at evaluation time.

Persistence (`.acperm`): JSON lines, one {"user_id": ..., "grants": [...]}
per line, last write wins on load.
"""

from __future__ import annotations

import json
import threading
from typing import AbstractSet, Iterable, Mapping


def partition(
    candidates: Mapping[str, float], grants: AbstractSet[str]
) -> tuple[dict[str, float], dict[str, float]]:
    """Split scored candidates into (permitted, denied), scores preserved.

    The two parts are disjoint and their union is the input; candidate
    order is preserved within each part.
    """
    permitted: dict[str, float] = {}
    denied: dict[str, float] = {}
    for adapter_id, score in candidates.items():
        if adapter_id in grants:
            permitted[adapter_id] = score
        else:
            denied[adapter_id] = score
    return permitted, denied


class PermissionRegistry:
    def __init__(self):
        self._lock = threading.RLock()
        self._grants: dict[str, frozenset[str]] = {}

    def set_permissions(self, user_id: str, grants: Iterable[str]) -> None:
        """Replace the user's vector; O(1) in the number of other users."""
        vector = frozenset(grants)
        with self._lock:
            self._grants[user_id] = vector

    def lookup(self, user_id: str) -> set[str]:
        """The user's grant set; unknown users get the empty set (deny by default)."""
        with self._lock:
            return set(self._grants.get(user_id, frozenset()))

    def users(self) -> list[str]:
        with self._lock:
            return list(self._grants)

    def save(self, path) -> None:
        with self._lock:
            lines = [
                json.dumps({"user_id": u, "grants": sorted(g)}) for u, g in self._grants.items()
            ]
        with open(path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "PermissionRegistry":
        reg = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                reg.set_permissions(record["user_id"], record["grants"])
        return reg
