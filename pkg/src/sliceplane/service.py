"""Control-plane engine and HTTP service shell.

``ControlPlane`` wires every module together and drives the full
pipeline: text -> tool call -> validation -> matching -> policy ->
order -> consortium-planned blueprint -> simulated deployment ->
monitoring.  Every consequential step lands in the hash-chained audit
log, which is the single source of truth: on restart the plane replays
it to rebuild orders, slice records, and simulator allocations.

The FastAPI app in ``build_app`` is a thin shell over the engine; the
CLI and the tests drive the engine both ways.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import threading
from dataclasses import replace
from typing import Iterator, Optional

from . import __version__
from .audit import AuditLog, AuditRecord, iter_records, verify_audit_chain
from .backends import BackendPool, PoolMember
from .canonical import canonical_json
from .config import ServiceConfig
from .consortium import GovernanceDecision
from .errors import SlicePlaneError
from .events import EventBus, event_from_record
from .intents import (
    SliceIntent,
    intent_backend,
    normalize_intent,
    parse_intent,
)
from .lifecycle import Orchestrator, SliceRecord
from .market import Marketplace, Match, SliceOrder, offer_from_dict
from .monitoring import RemediationAction, SlaMonitor, SlaViolation
from .planning import (
    GovernanceRejected,
    manifest_backend,
    generate_manifests,
    plan,
)
from .policy import action_subject, evaluate, load_rules, order_subject
from .simulator import Scenario, SimBackend
from .store import SliceStore
from .tools import ToolCall, ToolGateway, ToolRegistry

logger = logging.getLogger(__name__)


def _json_safe(value):
    """Round-trip through canonical JSON: detaches shared mutable state."""
    return json.loads(canonical_json(value))


def build_backend_pool(consortium_n: int) -> BackendPool:
    """One intent mapper plus n manifest generators (mock, deterministic)."""
    members = [PoolMember(intent_backend("mapper-a", 0), "intent_mapping")]
    for i in range(consortium_n):
        name = f"planner-{chr(ord('a') + i)}"
        members.append(PoolMember(manifest_backend(name, i), "manifest_generation"))
    return BackendPool(members)


class ControlPlane:
    def __init__(self, config: ServiceConfig, pool: Optional[BackendPool] = None):
        config.validate_files()
        self.config = config
        scenario = (
            Scenario.load(config.scenario_path)
            if config.scenario_path
            else Scenario(seed=config.seed, timeline=())
        )
        self.sim = SimBackend.from_fixture(config.clusters_path, scenario)
        for out_path in (config.audit_log_path, config.slice_store_path):
            parent = os.path.dirname(os.path.abspath(out_path))
            os.makedirs(parent, exist_ok=True)
        self.audit = AuditLog(config.audit_log_path)
        self.store = SliceStore(config.slice_store_path)
        self.registry = ToolRegistry.from_file(config.tools_path)
        self.gateway = ToolGateway(self.registry)
        self.market = Marketplace()
        self.market.load_catalog(config.offers_path)
        self.rules = load_rules(config.policies_path)
        self.pool = pool or build_backend_pool(config.consortium_n)
        self.monitor = SlaMonitor(
            config.window_ticks, config.hysteresis, config.cooldown_ticks
        )
        self.events = EventBus()
        self.orch = Orchestrator(
            self.sim, recorder=self._on_transition, clock=lambda: self.sim.clock
        )
        self._record_lock = threading.RLock()
        self._pump_thread: Optional[threading.Thread] = None
        self._pump_stop = threading.Event()
        if self.audit.next_seq == 0:
            self._record({"kind": "service_start", "version": __version__})
        else:
            self._replay()

    # -- audit plumbing ----------------------------------------------------

    def _record(self, payload: dict, tick: Optional[int] = None) -> AuditRecord:
        """Append one audit record and fan it out to stream subscribers."""
        with self._record_lock:
            payload = _json_safe(payload)
            record = self.audit.append(
                payload, tick if tick is not None else self.sim.clock
            )
            event = event_from_record(record)
            if event is not None:
                self.events.publish(event)
            return record

    def _on_transition(self, payload: dict, tick: int) -> None:
        record = self.orch.get_record(payload["slice_id"])
        self._record({**payload, "record": record.to_payload()}, tick)
        self.store.append_snapshot(record)

    # -- intent pipeline -----------------------------------------------------

    def submit_text(self, text: str, tenant_id: str = "default") -> dict:
        call = parse_intent(text, self.pool)
        return self.submit_call(call, tenant_id)

    def submit_call(self, call: ToolCall, tenant_id: str = "default") -> dict:
        validated = self.gateway.validate(call, tenant_id)
        self._record({"kind": "tool_call", "call": validated.to_payload()})
        result = self._execute(validated)
        self._record(
            {
                "kind": "tool_result",
                "call_id": validated.call_id,
                "tool": validated.tool,
                "result": result,
            }
        )
        return {
            "tool_call": validated.to_payload(),
            "result": result,
        }

    def _execute(self, validated) -> dict:
        if validated.tool == "request_slice":
            return self._request_slice(validated)
        if validated.tool == "query_offers":
            offers = self.market.catalog()
            region = validated.params.get("region")
            service_class = validated.params.get("service_class")
            if region:
                offers = [o for o in offers if o.region == region]
            if service_class:
                offers = [o for o in offers if o.service_class == service_class]
            return {"offers": [o.to_payload() for o in offers]}
        if validated.tool == "get_slice_status":
            record = self.orch.get_record(validated.params["slice_id"])
            return {"slice": record.to_payload()}
        if validated.tool == "terminate_slice":
            return self.terminate_slice(validated.params["slice_id"])
        raise SlicePlaneError(f"tool {validated.tool!r} has no executor")

    def _request_slice(self, validated) -> dict:
        intent = normalize_intent(validated.params, tenant_id=validated.tenant_id)
        matches = self.market.match(intent)
        out: dict = {
            "intent": intent.to_payload(),
            "matches": [m.to_payload() for m in matches],
            "order": None,
            "policy_verdict": None,
            "slice": None,
        }
        if not matches:
            return out
        best = matches[0]
        subject = order_subject(
            tenant_id=intent.tenant_id,
            region=intent.region,
            total_cost_minor_units=best.total_cost_minor_units,
            isolation_level=intent.isolation_level,
            offer_compliance_tags=best.offer.compliance_tags,
        )
        verdict = evaluate(subject, self.rules)
        vrec = self._record(
            {"kind": "policy_verdict", "subject": subject, "verdict": verdict.to_payload()}
        )
        out["policy_verdict"] = verdict.to_payload()
        if verdict.verdict != "allow":
            return out
        order = self.market.create_order(
            intent,
            best.offer.offer_id,
            verdict,
            verdict_ref=vrec.seq,
            pending=not self.config.auto_approve,
        )
        self._record({"kind": "order_created", "order": order.to_payload()})
        out["order"] = order.to_payload()
        if self.config.auto_approve:
            record = self._deploy_order(self.market.get_order(order.order_id))
            out["order"] = self.market.get_order(order.order_id).to_payload()
            out["slice"] = record.to_payload()
        return out

    # -- order lifecycle -----------------------------------------------------

    def approve_order(self, order_id: str) -> dict:
        order = self.market.approve_order(order_id)
        self._record({"kind": "order_status", "order_id": order_id, "status": "approved"})
        record = self._deploy_order(order)
        return {
            "order": self.market.get_order(order_id).to_payload(),
            "slice": record.to_payload(),
        }

    def reject_order(self, order_id: str) -> dict:
        order = self.market.reject_order(order_id)
        self._record({"kind": "order_status", "order_id": order_id, "status": "rejected"})
        return {"order": order.to_payload()}

    def _deploy_order(self, order: SliceOrder) -> SliceRecord:
        blueprint = plan(order)

        def on_decision(unit_id: str, decision: GovernanceDecision, candidates: list):
            with self._record_lock:
                decision.audit_ref = self.audit.next_seq
                self._record(
                    {
                        "kind": "governance_decision",
                        "order_id": order.order_id,
                        "unit_id": unit_id,
                        "decision": decision.to_payload(),
                        "candidates": [c.to_payload() for c in candidates],
                    }
                )

        try:
            blueprint = generate_manifests(
                blueprint,
                order,
                self.pool,
                n=self.config.consortium_n,
                on_decision=on_decision,
            )
        except GovernanceRejected:
            self._complete_order(order.order_id, fulfilled=False, cause="governance_rejected")
            raise
        record = self.orch.create_record(order.order_id)
        record = self.orch.deploy(blueprint, order.intent.service_class)
        if record.state == "Active":
            self.monitor.watch(order.order_id, order.intent)
        elif record.state == "Failed":
            self._complete_order(order.order_id, fulfilled=False, cause="deploy_failed")
        return record

    def _complete_order(self, order_id: str, fulfilled: bool, cause: str) -> None:
        order = self.market.get_order(order_id)
        if order is None or order.status != "approved":
            return
        self.market.complete_order(order_id, fulfilled)
        self._record(
            {
                "kind": "order_status",
                "order_id": order_id,
                "status": "fulfilled" if fulfilled else "cancelled",
                "cause": cause,
            }
        )

    def terminate_slice(self, slice_id: str) -> dict:
        record = self.orch.terminate(slice_id)
        self.monitor.unwatch(slice_id)
        self._complete_order(
            slice_id,
            fulfilled=record.was_active(),
            cause="terminated",
        )
        order = self.market.get_order(slice_id)
        return {
            "slice": record.to_payload(),
            "order": order.to_payload() if order else None,
        }

    # -- closed loop -----------------------------------------------------------

    def pump_tick(self) -> list[dict]:
        """Advance one tick, ingest telemetry, drive detection/remediation.

        Returns a summary of what happened this tick (for scenario-run
        output); everything important is audited as usual.
        """
        happened: list[dict] = []
        self.sim.advance_clock(1)
        for sample in self.sim.emit_telemetry():
            report, violation, action = self.monitor.ingest(sample)
            if report is not None:
                happened.append({"window": report.to_payload()})
            if violation is None:
                continue
            acted = self.deliver_violation(violation)
            happened.append({"violation": violation.to_payload(), "delivered": acted})
            if action is not None:
                executed = self.execute_action(action, allow=acted)
                happened.append({"action": action.to_payload(), "executed": executed})
        return happened

    def deliver_violation(self, violation: SlaViolation) -> bool:
        """Audit the violation; move an Active slice to Degraded.

        Violations observed while the slice is already Degraded, Healing,
        or terminal are recorded but trigger no transition.
        """
        record = self.orch.get_record(violation.slice_id)
        self._record(
            {
                "kind": "violation_detected",
                "violation": violation.to_payload(),
                "slice_state": record.state,
            }
        )
        if record.state != "Active":
            return False
        self.orch.report_violation(
            violation.slice_id,
            cause=f"{violation.metric} violated ({violation.violation_id})",
        )
        return True

    def execute_action(self, action: RemediationAction, allow: bool = True) -> bool:
        """Policy-check and run one remediation action."""
        if not allow:
            self._record(
                {
                    "kind": "remediation_action",
                    "action": action.to_payload(),
                    "executed": False,
                    "note": "suppressed: slice was not Active at detection",
                }
            )
            return False
        order = self.market.get_order(action.slice_id)
        tenant_id = order.intent.tenant_id if order else "default"
        verdict = evaluate(action_subject(tenant_id, action.kind), self.rules)
        self._record(
            {
                "kind": "policy_verdict",
                "subject": action_subject(tenant_id, action.kind),
                "verdict": verdict.to_payload(),
            }
        )
        if verdict.verdict != "allow":
            self._record(
                {
                    "kind": "remediation_action",
                    "action": action.to_payload(),
                    "executed": False,
                    "note": "policy denied",
                }
            )
            return False
        self._record(
            {"kind": "remediation_action", "action": action.to_payload(), "executed": True}
        )
        self.orch.remediate(
            action.slice_id,
            action.kind,
            action.target_unit,
            cause=f"remediation {action.action_id}",
        )
        return True

    # -- background pump ------------------------------------------------------

    def start_pump(self) -> None:
        if self.config.tick_interval_ms <= 0 or self._pump_thread is not None:
            return
        self._pump_stop.clear()

        def run():
            interval = self.config.tick_interval_ms / 1000
            while not self._pump_stop.wait(interval):
                try:
                    self.pump_tick()
                except Exception:
                    logger.exception("tick pump failed")

        self._pump_thread = threading.Thread(target=run, name="tick-pump", daemon=True)
        self._pump_thread.start()

    def stop_pump(self) -> None:
        if self._pump_thread is None:
            return
        self._pump_stop.set()
        self._pump_thread.join(timeout=5)
        self._pump_thread = None

    # -- offers (admin) ------------------------------------------------------

    def publish_offer(self, entry: dict) -> dict:
        offer = offer_from_dict(entry)
        self.market.publish_offer(offer)
        self._record({"kind": "offer_published", "offer": offer.to_payload()})
        return offer.to_payload()

    def withdraw_offer(self, offer_id: str) -> None:
        self.market.withdraw_offer(offer_id)
        self._record({"kind": "offer_withdrawn", "offer_id": offer_id})

    # -- event stream ----------------------------------------------------------

    def stream_events(
        self, after: Optional[int] = None, heartbeat_seconds: float = 15.0
    ) -> Iterator[str]:
        """NDJSON lines: replay events with seq > after, then go live.

        Subscribing before replay and de-duplicating on seq means a
        reconnecting client misses nothing regardless of timing.
        """
        sub_id, q = self.events.subscribe()
        try:
            last = after if after is not None else -1
            if after is not None:
                for record in iter_records(self.audit.path):
                    if record.seq <= after:
                        continue
                    event = event_from_record(record)
                    if event is not None:
                        last = record.seq
                        yield json.dumps(event, sort_keys=True) + "\n"
            while True:
                try:
                    event = q.get(timeout=heartbeat_seconds)
                except queue.Empty:
                    yield "\n"  # keepalive; clients skip blank lines
                    continue
                if event["seq"] <= last:
                    continue
                last = event["seq"]
                yield json.dumps(event, sort_keys=True) + "\n"
        finally:
            self.events.unsubscribe(sub_id)

    # -- reads -------------------------------------------------------------

    def slice_payloads(self) -> list[dict]:
        return [r.to_payload() for r in self.orch.records()]

    def compliance_for(self, slice_id: str) -> list[dict]:
        return [r.to_payload() for r in self.monitor.reports_for(slice_id)]

    def verify_audit(self) -> dict:
        ok, first_bad = verify_audit_chain(self.audit.path)
        return {"ok": ok, "first_bad_seq": first_bad, "next_seq": self.audit.next_seq}

    def audit_records(self, after: int = -1, limit: int = 100) -> list[dict]:
        out = []
        for record in iter_records(self.audit.path):
            if record.seq <= after:
                continue
            out.append(
                {
                    "seq": record.seq,
                    "timestamp": record.timestamp,
                    "payload": record.payload,
                    "prev_hash": record.prev_hash,
                    "hash": record.hash,
                }
            )
            if len(out) >= limit:
                break
        return out

    # -- restart replay ---------------------------------------------------------

    def _replay(self) -> None:
        """Rebuild orders, slice records, and sim state from the audit log."""
        orders: dict[str, SliceOrder] = {}
        latest_records: dict[str, SliceRecord] = {}
        last_tick = 0
        last_call_id = None
        for record in iter_records(self.audit.path):
            last_tick = max(last_tick, record.timestamp)
            payload = record.payload
            kind = payload.get("kind")
            if kind == "tool_call":
                last_call_id = payload["call"]["call_id"]
            elif kind == "order_created":
                order = _order_from_payload(payload["order"])
                orders[order.order_id] = order
            elif kind == "order_status":
                order_id = payload["order_id"]
                if order_id in orders:
                    orders[order_id] = replace(orders[order_id], status=payload["status"])
            elif kind == "offer_published":
                try:
                    self.market.publish_offer(offer_from_dict(payload["offer"]))
                except SlicePlaneError:
                    pass  # fixture already carries it
            elif kind == "offer_withdrawn":
                try:
                    self.market.withdraw_offer(payload["offer_id"])
                except SlicePlaneError:
                    pass
            elif kind == "slice_transition":
                rec = SliceRecord.from_payload(payload["record"])
                latest_records[rec.slice_id] = rec
        for order in orders.values():
            self.market.restore_order(order)
        if last_call_id:
            self.gateway.advance_past(last_call_id)
        self.sim.advance_clock(last_tick)
        for rec in latest_records.values():
            self.orch.adopt_record(rec)
            if rec.state in ("Active", "Degraded", "Healing", "Deploying"):
                for unit_id, unit in rec.deployed_units.items():
                    # apply at the originally governed replica count, then
                    # scale to the current one, so baseline load is preserved
                    handle = self.sim.apply_unit(
                        unit["manifest"], unit.get("service_class", "best_effort")
                    )
                    if unit["replicas"] != unit["manifest"].get("replicas"):
                        self.sim.scale(handle, unit["replicas"])
                    unit["handle"] = handle
            if rec.state in ("Active", "Degraded", "Healing"):
                order = orders.get(rec.slice_id)
                if order is not None:
                    self.monitor.watch(rec.slice_id, order.intent)
        self.store.rewrite(sorted(latest_records.values(), key=lambda r: r.slice_id))
        self._record(
            {
                "kind": "service_restart",
                "replayed_orders": len(orders),
                "replayed_slices": len(latest_records),
            },
            tick=last_tick,
        )
        logger.info(
            "replayed %d orders and %d slice records", len(orders), len(latest_records)
        )

    def close(self) -> None:
        self.stop_pump()
        self.audit.close()


def _order_from_payload(doc: dict) -> SliceOrder:
    intent_doc = doc["intent"]
    intent = SliceIntent(
        tenant_id=intent_doc["tenant_id"],
        region=intent_doc["region"],
        service_class=intent_doc["service_class"],
        use_case=intent_doc.get("use_case", ""),
        duration_hours=intent_doc["duration_hours"],
        budget_amount=intent_doc["budget_amount"],
        budget_currency=intent_doc["budget_currency"],
        latency_slo_ms=intent_doc.get("latency_slo_ms"),
        availability_slo_pct=intent_doc.get("availability_slo_pct"),
        throughput_slo_mbps=intent_doc.get("throughput_slo_mbps"),
        isolation_level=intent_doc.get("isolation_level", "shared"),
    )
    return SliceOrder(
        order_id=doc["order_id"],
        intent=intent,
        offer_id=doc["offer_id"],
        total_cost_minor_units=doc["total_cost_minor_units"],
        policy_verdict_ref=doc.get("policy_verdict_ref"),
        status=doc["status"],
    )


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_STATUS_FOR_CODE = {
    "unknown_slice": 404,
    "unknown_order": 404,
    "unknown_offer": 404,
    "unknown_handle": 404,
    "invalid_transition": 409,
    "invalid_state": 409,
    "invalid_order_state": 409,
    "duplicate_offer": 409,
    "duplicate_tool": 409,
    "offer_exhausted": 409,
    "stale_offer": 409,
    "governance_rejected": 409,
    "policy_denied": 403,
}


def build_app(plane: ControlPlane):
    from fastapi import FastAPI, Header, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, StreamingResponse

    app = FastAPI(title="network slice control plane", version=__version__)
    app.state.plane = plane
    # the operator console is served from its own origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(SlicePlaneError)
    async def handle_domain_error(request: Request, exc: SlicePlaneError):
        status = _STATUS_FOR_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.payload())

    @app.post("/intents", status_code=201)
    def post_intent(
        body: dict,
        x_tenant_id: Optional[str] = Header(default="default"),
    ):
        tenant = x_tenant_id or "default"
        if "text" in body:
            return plane.submit_text(body["text"], tenant_id=tenant)
        if "tool_call" in body:
            tc = body["tool_call"]
            call = ToolCall(
                tool=tc.get("tool", ""),
                params=tc.get("params", {}),
                schema_version=tc.get("schema_version"),
            )
            return plane.submit_call(call, tenant_id=tenant)
        raise SlicePlaneError("body must carry 'text' or 'tool_call'")

    @app.post("/orders/{order_id}/approve")
    def post_approve(order_id: str):
        return plane.approve_order(order_id)

    @app.post("/orders/{order_id}/reject")
    def post_reject(order_id: str):
        return plane.reject_order(order_id)

    @app.get("/orders")
    def get_orders():
        return {"orders": [o.to_payload() for o in plane.market.orders()]}

    @app.get("/orders/{order_id}")
    def get_order(order_id: str):
        order = plane.market.get_order(order_id)
        if order is None:
            return JSONResponse(
                status_code=404,
                content={"error": "unknown_order", "detail": f"order {order_id!r} does not exist"},
            )
        return {"order": order.to_payload()}

    @app.get("/slices")
    def get_slices():
        return {"slices": plane.slice_payloads()}

    @app.get("/slices/{slice_id}")
    def get_slice(slice_id: str):
        return {"slice": plane.orch.get_record(slice_id).to_payload()}

    @app.get("/slices/{slice_id}/compliance")
    def get_compliance(slice_id: str):
        plane.orch.get_record(slice_id)  # 404 on unknown
        return {"reports": plane.compliance_for(slice_id)}

    @app.post("/slices/{slice_id}/terminate", status_code=202)
    def post_terminate(slice_id: str):
        return plane.terminate_slice(slice_id)

    @app.get("/offers")
    def get_offers():
        return {"offers": [o.to_payload() for o in plane.market.catalog()]}

    @app.post("/offers", status_code=201)
    def post_offer(body: dict):
        return plane.publish_offer(body)

    @app.delete("/offers/{offer_id}")
    def delete_offer(offer_id: str):
        plane.withdraw_offer(offer_id)
        return {"withdrawn": offer_id}

    @app.get("/audit/verify")
    def get_audit_verify():
        return plane.verify_audit()

    @app.get("/audit/records")
    def get_audit_records(after: int = -1, limit: int = 100):
        return {"records": plane.audit_records(after=after, limit=min(limit, 1000))}

    @app.get("/events")
    def get_events(after: Optional[int] = None):
        return StreamingResponse(
            plane.stream_events(after=after),
            media_type="application/x-ndjson",
            headers={"Cache-Control": "no-cache"},
        )

    @app.get("/healthz")
    def get_healthz():
        return {"status": "ok", "clock": plane.sim.clock, "version": __version__}

    return app


def main(argv: Optional[list[str]] = None) -> int:
    import argparse

    import uvicorn

    from .config import load_config

    parser = argparse.ArgumentParser(description="run the slice control-plane service")
    parser.add_argument("--config", required=True, help="path to service config JSON")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    config = load_config(args.config)
    if args.host:
        config.listen_host = args.host
    if args.port:
        config.listen_port = args.port
    plane = ControlPlane(config)
    plane.start_pump()
    app = build_app(plane)
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
    finally:
        plane.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
