"""Scripted closed-loop runs against an in-process control plane.

This is the engine behind the ``scenario-run`` CLI command and the
end-to-end tests: bring up a ControlPlane, submit one provisioning
request, bind a fault timeline to the resulting slice, then pump the
clock and watch detection and remediation play out.  Everything the run
produces is also in the audit log, so the returned summary is a
convenience, not a second source of truth.
"""

from __future__ import annotations

import json
import logging
from typing import Optional

from .audit import iter_records
from .config import ServiceConfig
from .events import event_from_record
from .service import ControlPlane
from .simulator import Scenario

logger = logging.getLogger(__name__)

# The stock demonstration request; matches offer off-001 in the bundled
# catalog and carries a 10 ms latency objective for the fault timeline
# to violate.
DEFAULT_INTENT_TEXT = (
    "Provision a low-latency network slice in Stockholm for autonomous "
    "vehicle testing for the next two hours, with latency below 10 ms "
    "and a maximum cost of €120"
)

# Timeline entries may name this placeholder instead of a concrete slice
# id; it is substituted once the provisioned slice exists.
SLICE_PLACEHOLDER = "@slice"


def resolve_scenario(doc: dict, slice_id: str) -> Scenario:
    """Build a Scenario with the placeholder bound to a real slice id."""
    resolved = {
        "seed": doc.get("seed", 0),
        "timeline": [
            {**e, "slice_id": slice_id if e.get("slice_id") == SLICE_PLACEHOLDER else e.get("slice_id", "")}
            for e in doc.get("timeline", [])
        ],
    }
    return Scenario.from_dict(resolved)


def export_event_lines(audit_path: str) -> list[str]:
    """Public stream lines for the whole audit log, byte-identical to
    what a live ``/events`` subscriber would have received."""
    lines = []
    for record in iter_records(audit_path):
        event = event_from_record(record)
        if event is not None:
            lines.append(json.dumps(event, sort_keys=True) + "\n")
    return lines


def run_closed_loop(
    config: ServiceConfig,
    scenario_doc: Optional[dict] = None,
    text: str = DEFAULT_INTENT_TEXT,
    ticks: int = 120,
    tenant_id: str = "default",
) -> dict:
    """Provision one slice, run the fault timeline, return a run summary.

    The plane is constructed and closed inside this call; the audit log
    and slice store remain on disk at the paths named by ``config``.
    """
    if ticks < 0:
        raise ValueError("ticks must be non-negative")
    plane = ControlPlane(config)
    try:
        outcome = plane.submit_text(text, tenant_id=tenant_id)
        result = outcome["result"]
        order = result.get("order")
        summary: dict = {
            "intent": result.get("intent"),
            "order": order,
            "matches": result.get("matches", []),
            "policy_verdict": result.get("policy_verdict"),
            "slice_id": None,
            "ticks_run": 0,
            "violations": [],
            "actions": [],
            "windows": [],
            "final_state": None,
            "transitions": [],
        }
        if order is None or result.get("slice") is None:
            summary["audit"] = plane.verify_audit()
            return summary

        slice_id = order["order_id"]
        summary["slice_id"] = slice_id
        if scenario_doc is not None:
            plane.sim.bind_scenario(resolve_scenario(scenario_doc, slice_id))

        for _ in range(ticks):
            for happening in plane.pump_tick():
                tick = plane.sim.clock
                if "violation" in happening:
                    summary["violations"].append({**happening, "tick": tick})
                elif "action" in happening:
                    summary["actions"].append({**happening, "tick": tick})
                elif "window" in happening:
                    summary["windows"].append(happening["window"])
        summary["ticks_run"] = ticks

        record = plane.orch.get_record(slice_id)
        summary["final_state"] = record.state
        summary["transitions"] = list(record.history)
        summary["deployed_units"] = {
            unit_id: {"status": u["status"], "replicas": u["replicas"]}
            for unit_id, u in record.deployed_units.items()
        }
        summary["audit"] = plane.verify_audit()
        return summary
    finally:
        plane.close()
