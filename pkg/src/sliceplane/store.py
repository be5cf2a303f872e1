"""Materialized slice-record store.

The audit log is the system of record; this file is a queryable view,
one JSON line per record snapshot, last line per slice_id wins.  On
startup the service rebuilds state from the audit log and rewrites this
view, so a stale or deleted store file is never a correctness problem.
"""

from __future__ import annotations

import json
import logging
import os
import threading

from .lifecycle import SliceRecord

logger = logging.getLogger(__name__)


class SliceStore:
    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)

    def append_snapshot(self, record: SliceRecord) -> None:
        line = json.dumps(
            {"slice_id": record.slice_id, "record": record.to_payload()},
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def load(self) -> dict:
        """slice_id -> SliceRecord from the latest snapshot per slice."""
        if not os.path.exists(self.path):
            return {}
        latest: dict = {}
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                latest[doc["slice_id"]] = doc["record"]
        return {sid: SliceRecord.from_payload(doc) for sid, doc in latest.items()}

    def rewrite(self, records: list[SliceRecord]) -> None:
        """Replace the view wholesale (used after audit replay)."""
        with self._lock:
            tmp = self.path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                for record in records:
                    fh.write(
                        json.dumps(
                            {"slice_id": record.slice_id, "record": record.to_payload()},
                            sort_keys=True,
                            separators=(",", ":"),
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
            os.replace(tmp, self.path)
