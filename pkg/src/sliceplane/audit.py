"""Hash-chained append-only audit log.

Every record links to its predecessor by embedding the predecessor's
digest, so any in-place edit, deletion, or reordering breaks the chain
from the tampered record onward.  Records are stored as JSON lines and
flushed with fsync before ``append`` returns.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from typing import Any, Iterator, Optional

from .canonical import GENESIS_DIGEST, digest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: int
    payload: dict
    prev_hash: str
    hash: str

    def to_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "timestamp": self.timestamp,
                "payload": self.payload,
                "prev_hash": self.prev_hash,
                "hash": self.hash,
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )


def record_digest(seq: int, timestamp: int, payload: dict, prev_hash: str) -> str:
    """Digest of the canonical form of a record, excluding its own hash."""
    return digest(
        {"seq": seq, "timestamp": timestamp, "payload": payload, "prev_hash": prev_hash}
    )


class AuditLog:
    """Append-only JSONL log with per-record hash chaining.

    The log is the system of record: all derived state can be rebuilt by
    replaying it.  ``timestamp`` is a logical tick supplied by the caller,
    not wall-clock time, so replays are byte-for-byte reproducible.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._seq = -1
        self._prev_hash = GENESIS_DIGEST
        self._fh = None
        self._load_tail()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _load_tail(self) -> None:
        if not os.path.exists(self.path):
            return
        last = None
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    last = line
        if last is None:
            return
        doc = json.loads(last)
        self._seq = doc["seq"]
        self._prev_hash = doc["hash"]

    @property
    def next_seq(self) -> int:
        return self._seq + 1

    @property
    def head_hash(self) -> str:
        return self._prev_hash

    def append(self, payload: dict, timestamp: int) -> AuditRecord:
        with self._lock:
            seq = self._seq + 1
            rec_hash = record_digest(seq, timestamp, payload, self._prev_hash)
            record = AuditRecord(
                seq=seq,
                timestamp=timestamp,
                payload=payload,
                prev_hash=self._prev_hash,
                hash=rec_hash,
            )
            self._fh.write(record.to_line() + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._seq = seq
            self._prev_hash = rec_hash
            return record

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def iter_records(path: str) -> Iterator[AuditRecord]:
    """Yield records in file order without verifying the chain."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            yield AuditRecord(
                seq=doc["seq"],
                timestamp=doc["timestamp"],
                payload=doc["payload"],
                prev_hash=doc["prev_hash"],
                hash=doc["hash"],
            )


def verify_audit_chain(path: str) -> tuple[bool, Optional[int]]:
    """Walk the log checking digests and linkage.

    Returns ``(True, None)`` for an intact chain, else ``(False, seq)``
    where ``seq`` is the first record that fails.  A line that does not
    parse, a wrong prev_hash, a recomputed digest mismatch, or a sequence
    gap all count as failures at that position.
    """
    if not os.path.exists(path):
        return True, None
    expected_prev = GENESIS_DIGEST
    expected_seq = 0
    # binary read: a corrupted byte must surface as a bad record, not a
    # decode crash
    with open(path, "rb") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw.decode("utf-8"))
                seq = doc["seq"]
                timestamp = doc["timestamp"]
                payload = doc["payload"]
                prev_hash = doc["prev_hash"]
                stored = doc["hash"]
            except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError):
                return False, expected_seq
            if seq != expected_seq or prev_hash != expected_prev:
                return False, expected_seq
            if record_digest(seq, timestamp, payload, prev_hash) != stored:
                return False, expected_seq
            expected_prev = stored
            expected_seq += 1
    return True, None
