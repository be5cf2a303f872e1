"""Sortable identifier generation."""

from __future__ import annotations

import threading


class IdFactory:
    """Thread-safe counter-backed ids: ``<prefix>-<zero-padded counter>``.

    Zero padding keeps lexicographic order equal to creation order.
    """

    def __init__(self, prefix: str, width: int = 6, start: int = 1):
        self.prefix = prefix
        self.width = width
        self._next = start
        self._lock = threading.Lock()

    def next(self) -> str:
        with self._lock:
            value = self._next
            self._next += 1
        return f"{self.prefix}-{value:0{self.width}d}"

    def advance_past(self, existing: str) -> None:
        """Ensure future ids sort after ``existing`` (used after replay)."""
        tail = existing.rsplit("-", 1)[-1]
        if tail.isdigit():
            with self._lock:
                self._next = max(self._next, int(tail) + 1)
