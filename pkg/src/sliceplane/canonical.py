"""Canonical JSON serialization and digests.

All hashing in the audit chain and all cross-document comparison in the
consortium go through this module so that every producer yields identical
bytes for identical content: JSON with lexicographically sorted keys,
compact separators, UTF-8, no ASCII escaping.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterator

GENESIS_DIGEST = "0" * 64


def canonical_json(value: Any) -> str:
    """Serialize ``value`` to the canonical JSON form used for hashing."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(value: Any) -> str:
    """Lowercase hex SHA-256 of the canonical JSON encoding of ``value``."""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def stable_unit_interval(*parts: Any) -> float:
    """Deterministic value in [0, 1) derived from ``parts`` via SHA-256.

    Used for seeded jitter so that identical inputs produce identical noise
    on every platform and run (Python's salted ``hash`` is unusable here).
    """
    key = "|".join(str(p) for p in parts).encode("utf-8")
    raw = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    return raw / 2**64


def flatten_pairs(doc: Any, prefix: str = "") -> frozenset[tuple[str, str]]:
    """Flatten ``doc`` into a set of (key-path, canonical scalar) pairs.

    Nested mappings extend the path with ``.key``; sequences with ``[i]``.
    The scalar side is the canonical JSON of the leaf so 1 and "1" stay
    distinct.  Set overlap of two flattened documents is the basis of the
    consortium agreement score.
    """
    return frozenset(_walk(doc, prefix))


def _walk(node: Any, path: str) -> Iterator[tuple[str, str]]:
    if isinstance(node, dict):
        for key in sorted(node):
            yield from _walk(node[key], f"{path}.{key}" if path else str(key))
    elif isinstance(node, (list, tuple)):
        for i, item in enumerate(node):
            yield from _walk(item, f"{path}[{i}]")
    else:
        yield path, canonical_json(node)
