"""Slice lifecycle state machine and deployment orchestration.

The state machine is event-sourced: a record's history is the
authoritative store and its current state is a fold over that history.
Transitions happen only through the table below; anything else raises
InvalidTransition, never a silent no-op.

    Planned     + DeployStart       -> Deploying
    Deploying   + AllHealthy        -> Active
    Deploying   + UnitFailed        -> RollingBack
    RollingBack + RollbackDone      -> Failed
    Active      + ViolationDetected -> Degraded
    Degraded    + RemediationStart  -> Healing
    Healing     + HealthRestored    -> Active
    Healing     + RemediationFailed -> Degraded
    any of Planned, Deploying, Active, Degraded, Healing, RollingBack,
    Failed      + TerminateRequest  -> Terminated

Terminated is terminal; Failed admits only the explicit TerminateRequest
cleanup.  Deployment applies units in topological order with health
retries and reverse-order rollback; remediation supports replica
scale-out (capped) and unit redeploy.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .backends import BackendUnavailable
from .errors import SlicePlaneError
from .planning import MAX_REPLICAS, Blueprint, topological_order

logger = logging.getLogger(__name__)

STATES = (
    "Planned",
    "Deploying",
    "Active",
    "Degraded",
    "Healing",
    "RollingBack",
    "Failed",
    "Terminated",
)

EVENTS = (
    "DeployStart",
    "AllHealthy",
    "UnitFailed",
    "RollbackDone",
    "ViolationDetected",
    "RemediationStart",
    "HealthRestored",
    "RemediationFailed",
    "TerminateRequest",
)

_TERMINABLE = ("Planned", "Deploying", "Active", "Degraded", "Healing", "RollingBack", "Failed")

TRANSITIONS = {
    ("Planned", "DeployStart"): "Deploying",
    ("Deploying", "AllHealthy"): "Active",
    ("Deploying", "UnitFailed"): "RollingBack",
    ("RollingBack", "RollbackDone"): "Failed",
    ("Active", "ViolationDetected"): "Degraded",
    ("Degraded", "RemediationStart"): "Healing",
    ("Healing", "HealthRestored"): "Active",
    ("Healing", "RemediationFailed"): "Degraded",
    **{(s, "TerminateRequest"): "Terminated" for s in _TERMINABLE},
}

HEALTH_RETRIES = 3
RETRY_BACKOFF_TICKS = (1, 2, 4)

REMEDIATION_KINDS = ("scale_out", "redeploy_unit")


class InvalidTransition(SlicePlaneError):
    code = "invalid_transition"

    def __init__(self, state: str, event: str):
        super().__init__(f"no transition for ({state}, {event})")
        self.state = state
        self.event = event


class InvalidState(SlicePlaneError):
    code = "invalid_state"


class ActionUnsupported(SlicePlaneError):
    code = "action_unsupported"


class UnknownSlice(SlicePlaneError):
    code = "unknown_slice"


@dataclass
class SliceRecord:
    """slice_id doubles as the order id; one slice per order."""

    slice_id: str
    state: str = "Planned"
    # unit_id -> {"status", "replicas", "handle"}; insertion order = apply order
    deployed_units: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    escalated: bool = False

    def was_active(self) -> bool:
        return any(h["to"] == "Active" for h in self.history)

    def to_payload(self) -> dict:
        return {
            "slice_id": self.slice_id,
            "state": self.state,
            "deployed_units": self.deployed_units,
            "history": self.history,
            "escalated": self.escalated,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "SliceRecord":
        return cls(
            slice_id=doc["slice_id"],
            state=doc["state"],
            deployed_units=doc.get("deployed_units", {}),
            history=doc.get("history", []),
            escalated=doc.get("escalated", False),
        )


def next_state(state: str, event: str) -> str:
    """The raw transition table; raises InvalidTransition off-table."""
    try:
        return TRANSITIONS[(state, event)]
    except KeyError:
        raise InvalidTransition(state, event) from None


def fold_history(history: list, initial: str = "Planned") -> str:
    """Replay transitions to recover state; history is authoritative."""
    state = initial
    for entry in history:
        state = next_state(state, entry["event"])
    return state


class Orchestrator:
    """Executes blueprints and runtime operations against a backend.

    All events for one slice are serialized through that slice's lock
    (per-slice actor semantics); separate slices proceed independently.
    ``recorder(payload, tick)`` is called once per transition so the
    caller can audit and stream it.
    """

    def __init__(
        self,
        backend,
        recorder: Optional[Callable[[dict, int], None]] = None,
        clock: Optional[Callable[[], int]] = None,
    ):
        self.backend = backend
        self._recorder = recorder or (lambda payload, tick: None)
        self._clock = clock or (lambda: getattr(backend, "clock", 0))
        self._records: dict[str, SliceRecord] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- record registry ---------------------------------------------------

    def create_record(self, slice_id: str) -> SliceRecord:
        with self._registry_lock:
            if slice_id in self._records:
                raise ValueError(f"slice {slice_id!r} already exists")
            record = SliceRecord(slice_id=slice_id)
            self._records[slice_id] = record
            self._locks[slice_id] = threading.Lock()
            return record

    def adopt_record(self, record: SliceRecord) -> None:
        """Install a record rebuilt from replay (crash recovery)."""
        with self._registry_lock:
            self._records[record.slice_id] = record
            self._locks.setdefault(record.slice_id, threading.Lock())

    def get_record(self, slice_id: str) -> SliceRecord:
        record = self._records.get(slice_id)
        if record is None:
            raise UnknownSlice(f"slice {slice_id!r} does not exist")
        return record

    def records(self) -> list[SliceRecord]:
        with self._registry_lock:
            return sorted(self._records.values(), key=lambda r: r.slice_id)

    def _lock(self, slice_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(slice_id, threading.Lock())

    # -- state machine -----------------------------------------------------

    def transition(self, record: SliceRecord, event: str, cause: str = "") -> SliceRecord:
        """Apply one event, append history, and report it to the recorder."""
        new = next_state(record.state, event)
        tick = self._clock()
        entry = {
            "from": record.state,
            "event": event,
            "to": new,
            "cause": cause,
            "tick": tick,
        }
        record.history.append(entry)
        record.state = new
        if new == "Active":
            record.escalated = False
        self._recorder(
            {"kind": "slice_transition", "slice_id": record.slice_id, **entry},
            tick,
        )
        return record

    # -- deployment --------------------------------------------------------

    def deploy(self, blueprint: Blueprint, service_class: str) -> SliceRecord:
        """Staged deploy with health gates; rollback on any unit failure."""
        slice_id = blueprint.order_id
        with self._lock(slice_id):
            record = self.get_record(slice_id)
            if record.state != "Planned":
                raise InvalidTransition(record.state, "DeployStart")
            if not self.backend.ping():
                raise BackendUnavailable("infrastructure backend is unreachable")
            self.transition(record, "DeployStart", cause="deploy requested")
            order = topological_order(blueprint)
            applied: list[tuple[str, str]] = []  # (unit_id, handle) in apply order
            for unit_id in order:
                unit = blueprint.unit(unit_id)
                try:
                    handle = self.backend.apply_unit(unit.manifest, service_class)
                except SlicePlaneError as exc:
                    self.transition(
                        record, "UnitFailed", cause=f"{unit_id}: {exc}"
                    )
                    self._rollback(record, applied)
                    return record
                applied.append((unit_id, handle))
                record.deployed_units[unit_id] = {
                    "status": "applied",
                    "replicas": unit.manifest["replicas"],
                    "handle": handle,
                    "manifest": unit.manifest,
                    "service_class": service_class,
                }
                if not self._await_health(handle):
                    self.transition(
                        record,
                        "UnitFailed",
                        cause=f"{unit_id} unhealthy after {HEALTH_RETRIES} retries",
                    )
                    self._rollback(record, applied)
                    return record
                record.deployed_units[unit_id]["status"] = "healthy"
            self.transition(record, "AllHealthy", cause="all units healthy")
            return record

    def _await_health(self, handle: str) -> bool:
        """Initial check plus up to HEALTH_RETRIES retries at fixed backoff."""
        if self.backend.check_health(handle) == "healthy":
            return True
        for backoff in RETRY_BACKOFF_TICKS[:HEALTH_RETRIES]:
            self.backend.wait(backoff)
            if self.backend.check_health(handle) == "healthy":
                return True
        return False

    def _rollback(self, record: SliceRecord, applied: list) -> None:
        """Tear down applied units in exact reverse apply order."""
        for unit_id, handle in reversed(applied):
            self.backend.teardown(handle)
            record.deployed_units.pop(unit_id, None)
        self.transition(
            record, "RollbackDone", cause=f"rolled back {len(applied)} units"
        )

    # -- runtime operations --------------------------------------------------

    def report_violation(self, slice_id: str, cause: str = "") -> SliceRecord:
        with self._lock(slice_id):
            record = self.get_record(slice_id)
            return self.transition(record, "ViolationDetected", cause=cause)

    def remediate(self, slice_id: str, kind: str, target_unit: str, cause: str = "") -> SliceRecord:
        """Execute one remediation action on a Degraded slice."""
        with self._lock(slice_id):
            record = self.get_record(slice_id)
            if record.state != "Degraded":
                raise InvalidState(
                    f"slice {slice_id!r} is {record.state}; remediation needs Degraded"
                )
            if kind not in REMEDIATION_KINDS:
                raise ActionUnsupported(f"unknown remediation kind {kind!r}")
            unit = record.deployed_units.get(target_unit)
            if unit is None:
                raise ActionUnsupported(
                    f"slice {slice_id!r} has no deployed unit {target_unit!r}"
                )
            self.transition(record, "RemediationStart", cause=cause or kind)
            try:
                if kind == "scale_out":
                    ok = self._scale_out(record, target_unit, unit)
                else:
                    ok = self._redeploy(record, target_unit, unit)
            except SlicePlaneError as exc:
                logger.warning("remediation error on %s: %s", slice_id, exc)
                ok = False
            if ok and self.backend.check_health(unit["handle"]) == "healthy":
                self.transition(record, "HealthRestored", cause=f"{kind} succeeded")
            else:
                record.escalated = True
                self.transition(
                    record, "RemediationFailed", cause=f"{kind} did not restore health"
                )
            return record

    def _scale_out(self, record: SliceRecord, unit_id: str, unit: dict) -> bool:
        new_replicas = unit["replicas"] + 1
        if new_replicas > MAX_REPLICAS:
            logger.warning(
                "slice %s unit %s already at replica cap %d",
                record.slice_id, unit_id, MAX_REPLICAS,
            )
            return False
        self.backend.scale(unit["handle"], new_replicas)
        unit["replicas"] = new_replicas
        return True

    def _redeploy(self, record: SliceRecord, unit_id: str, unit: dict) -> bool:
        manifest = unit.get("manifest")
        if manifest is None:
            raise ActionUnsupported(
                f"no manifest retained for {record.slice_id}/{unit_id}; cannot redeploy"
            )
        # keep any replica count scale_out has since applied
        manifest = {**manifest, "replicas": unit["replicas"]}
        self.backend.teardown(unit["handle"])
        if hasattr(self.backend, "set_unit_health"):
            # a fresh instance comes up healthy unless the fault is sticky
            self.backend.set_unit_health(record.slice_id, unit_id, False)
        handle = self.backend.apply_unit(manifest, unit.get("service_class", "best_effort"))
        unit["handle"] = handle
        unit["status"] = "healthy"
        return True

    def terminate(self, slice_id: str, cause: str = "operator request") -> SliceRecord:
        """Tear down everything (reverse apply order) and finalize the record."""
        with self._lock(slice_id):
            record = self.get_record(slice_id)
            # validate against the table before touching the backend
            next_state(record.state, "TerminateRequest")
            if not self.backend.ping():
                raise BackendUnavailable("infrastructure backend is unreachable")
            for unit_id in reversed(list(record.deployed_units)):
                handle = record.deployed_units[unit_id]["handle"]
                self.backend.teardown(handle)
                del record.deployed_units[unit_id]
            return self.transition(record, "TerminateRequest", cause=cause)
