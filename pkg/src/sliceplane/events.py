"""Live event fan-out and the audit-record -> stream-event mapping.

The /events stream and its replay path share one translation,
``event_from_record``, so a reconnecting client that replays from a
sequence number sees byte-identical events to one that never dropped.
"""

from __future__ import annotations

import logging
import queue
import threading
from typing import Optional

from .audit import AuditRecord

logger = logging.getLogger(__name__)

# audit payload kinds that surface on the public stream
STREAM_KINDS = (
    "slice_transition",
    "violation_detected",
    "remediation_action",
    "governance_decision",
)


def event_from_record(record: AuditRecord) -> Optional[dict]:
    """Shape an audit record for the stream; None for non-stream kinds."""
    kind = record.payload.get("kind")
    if kind not in STREAM_KINDS:
        return None
    return {
        "seq": record.seq,
        "tick": record.timestamp,
        "kind": kind,
        "payload": record.payload,
    }


class EventBus:
    """Thread-safe fan-out of stream events to live subscribers."""

    def __init__(self, max_queue: int = 10000):
        self._subscribers: dict[int, queue.Queue] = {}
        self._next_id = 0
        self._lock = threading.Lock()
        self._max_queue = max_queue

    def subscribe(self) -> tuple[int, queue.Queue]:
        with self._lock:
            sub_id = self._next_id
            self._next_id += 1
            q: queue.Queue = queue.Queue(maxsize=self._max_queue)
            self._subscribers[sub_id] = q
            return sub_id, q

    def unsubscribe(self, sub_id: int) -> None:
        with self._lock:
            self._subscribers.pop(sub_id, None)

    def publish(self, event: dict) -> None:
        with self._lock:
            targets = list(self._subscribers.items())
        for sub_id, q in targets:
            try:
                q.put_nowait(event)
            except queue.Full:
                # a stalled consumer must not block the control plane
                logger.warning("dropping subscriber %d: queue full", sub_id)
                self.unsubscribe(sub_id)

    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subscribers)
