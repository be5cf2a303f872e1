"""Acceptance gate: the eight load-bearing guarantees, one test each.

Run with ``pytest -v tests/test_acceptance.py`` to get a pass/fail line
per criterion.  Each test carries its own independent oracle: expected
values are restated or recomputed here rather than imported from the
code under test.
"""

import json
import random
import time
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import pytest

from sliceplane.audit import AuditLog, verify_audit_chain
from sliceplane.consortium import CandidateOutput, Check, govern
from sliceplane.intents import SliceIntent
from sliceplane.lifecycle import (
    EVENTS,
    STATES,
    InvalidTransition,
    Orchestrator,
    next_state,
)
from sliceplane.market import Marketplace, SliceOffer
from sliceplane.planning import Blueprint, DeploymentUnit
from sliceplane.runner import export_event_lines, resolve_scenario, run_closed_loop
from sliceplane.service import ControlPlane
from sliceplane.simulator import (
    NoClusterInRegion,
    PlacementFailed,
    SimBackend,
    SimCluster,
)

from conftest import FIXTURES, STOCKHOLM_TEXT, make_config

RNG_SEED = 20260819


# -- criterion 1: end-to-end provisioning ------------------------------------


def test_criterion_1_end_to_end_provisioning(tmp_path):
    """Text request to Active slice: one match, costed, policied, audited,
    deterministic, and done in under five seconds."""
    started = time.monotonic()
    plane = ControlPlane(make_config(tmp_path / "run1"))
    try:
        body = plane.submit_text(STOCKHOLM_TEXT)["result"]
        elapsed = time.monotonic() - started

        assert [m["offer"]["offer_id"] for m in body["matches"]] == ["off-001"]
        assert body["matches"][0]["total_cost_minor_units"] == 10000
        assert body["intent"]["budget_amount"] == 12000
        assert 10000 <= body["intent"]["budget_amount"]
        assert body["policy_verdict"]["verdict"] == "allow"
        assert body["order"]["status"] == "approved"
        assert body["slice"]["state"] == "Active"
        assert len(body["slice"]["deployed_units"]) == 4
        assert all(
            u["status"] == "healthy" for u in body["slice"]["deployed_units"].values()
        )
        ok, first_bad = verify_audit_chain(plane.audit.path)
        assert ok and first_bad is None
        assert elapsed < 5.0
        audit_bytes_1 = Path(plane.audit.path).read_bytes()
    finally:
        plane.close()

    # a second fresh run produces a byte-identical audit trail
    plane2 = ControlPlane(make_config(tmp_path / "run2"))
    try:
        plane2.submit_text(STOCKHOLM_TEXT)
        audit_bytes_2 = Path(plane2.audit.path).read_bytes()
    finally:
        plane2.close()
    assert audit_bytes_1 == audit_bytes_2


# -- criterion 2: closed-loop detection and remediation -----------------------


def test_criterion_2_closed_loop_remediation(tmp_path, canonical_scenario):
    """A latency fault at tick F violates in window F//W + H - 1, triggers
    exactly one scale-out, and the slice is Active and compliant again
    within two windows of the violation."""
    window_ticks, hysteresis = 10, 3
    fault_tick = canonical_scenario["timeline"][0]["tick"]
    expected_window = fault_tick // window_ticks + hysteresis - 1

    summary = run_closed_loop(
        make_config(tmp_path / "a"), scenario_doc=canonical_scenario, ticks=120
    )

    assert len(summary["violations"]) == 1
    violation = summary["violations"][0]["violation"]
    assert violation["metric"] == "latency_ms"
    assert violation["window_range"] == [
        expected_window * window_ticks,
        expected_window * window_ticks + window_ticks - 1,
    ]
    assert violation["consecutive_windows"] == hysteresis

    assert len(summary["actions"]) == 1
    action = summary["actions"][0]
    assert action["action"]["kind"] == "scale_out"
    assert action["executed"] is True

    assert summary["final_state"] == "Active"
    assert [t["to"] for t in summary["transitions"]] == [
        "Deploying", "Active", "Degraded", "Healing", "Active",
    ]
    # recovery budget: both windows after the violating one are compliant
    by_index = {w["window_index"]: w for w in summary["windows"]}
    for idx in (expected_window + 1, expected_window + 2):
        assert all(m["compliant"] for m in by_index[idx]["metrics"].values())

    # same seed, fresh state: byte-identical public event sequence
    config_b = make_config(tmp_path / "b")
    run_closed_loop(config_b, scenario_doc=canonical_scenario, ticks=120)
    config_a = make_config(tmp_path / "a")
    assert export_event_lines(config_a.audit_log_path) == export_event_lines(
        config_b.audit_log_path
    )


# -- criterion 3: governance safety -------------------------------------------


def test_criterion_3_governance_never_selects_failing():
    """Across 1000 randomized candidate sets the governor never picks a
    candidate that fails a check, rejects all iff all fail, and explains
    every candidate's verdict."""
    rng = random.Random(RNG_SEED)
    checks = [
        Check(name="cost-positive", predicate=lambda c: isinstance(c, dict) and c.get("cost", 0) > 0),
        Check(name="quality-cap", predicate=lambda c: isinstance(c, dict) and c.get("q", 0) <= 5),
    ]

    def expected_failing(cand: CandidateOutput) -> bool:
        if cand.malformed or not isinstance(cand.content, dict):
            return True
        return cand.content.get("cost", 0) <= 0 or cand.content.get("q", 0) > 5

    fixtures = 0
    for i in range(1000):
        candidates = []
        for j in range(rng.randint(2, 6)):
            if rng.random() < 0.15:
                candidates.append(
                    CandidateOutput(
                        backend_id=f"b{j}", task="manifest_generation",
                        content=None, generation_seed=i, malformed=True, raw="garbage",
                    )
                )
            else:
                content = {"cost": rng.randint(-3, 9), "q": rng.randint(0, 9)}
                candidates.append(
                    CandidateOutput(
                        backend_id=f"b{j}", task="manifest_generation",
                        content=content, generation_seed=i, raw=json.dumps(content),
                    )
                )
        decision = govern(candidates, checks, cost_fn=lambda c: c.get("cost", 0))
        fixtures += 1

        assert len(decision.per_candidate_verdicts) == len(candidates)
        explanation = "\n".join(decision.explanation)
        for cand in candidates:
            assert cand.backend_id in explanation
        any_passing = any(not expected_failing(c) for c in candidates)
        if any_passing:
            assert decision.outcome == "selected"
            chosen = next(
                c for c in candidates if c.backend_id == decision.chosen_backend_id
            )
            assert not expected_failing(chosen)
        else:
            assert decision.outcome == "rejected_all"
            assert decision.chosen is None
    assert fixtures >= 1000


# -- criterion 4: matching equals the exhaustive oracle ------------------------


REGIONS = ["stockholm", "oslo", "gothenburg", "copenhagen"]
CLASSES = ["low_latency", "high_reliability", "high_throughput", "best_effort"]


def _oracle_cost(rate: int, duration: float) -> int:
    return int(
        (Decimal(rate) * Decimal(str(duration))).quantize(Decimal("1"), ROUND_HALF_UP)
    )


def _oracle_match(offers, intent):
    """Plain filter-and-sort restatement of the matching contract."""
    out = []
    for o in offers:
        if o.region != intent.region or o.service_class != intent.service_class:
            continue
        if o.capacity_slots < 1 or o.currency != intent.budget_currency:
            continue
        if intent.isolation_level not in o.isolation_supported:
            continue
        if intent.latency_slo_ms is not None and (
            o.guaranteed_latency_ms is None or o.guaranteed_latency_ms > intent.latency_slo_ms
        ):
            continue
        if intent.availability_slo_pct is not None and (
            o.guaranteed_availability_pct is None
            or o.guaranteed_availability_pct < intent.availability_slo_pct
        ):
            continue
        if intent.throughput_slo_mbps is not None and (
            o.guaranteed_throughput_mbps is None
            or o.guaranteed_throughput_mbps < intent.throughput_slo_mbps
        ):
            continue
        cost = _oracle_cost(o.rate_minor_units_per_hour, intent.duration_hours)
        if cost > intent.budget_amount:
            continue
        out.append((cost, o.offer_id))
    return sorted(out)


def _random_offer(rng, i):
    return SliceOffer(
        offer_id=f"off-{i:05d}",
        provider_id=f"prov-{rng.randint(1, 9)}",
        region=rng.choice(REGIONS),
        service_class=rng.choice(CLASSES),
        rate_minor_units_per_hour=rng.randint(1, 30000),
        capacity_slots=rng.randint(0, 3),
        currency=rng.choice(["EUR", "USD"]),
        guaranteed_latency_ms=rng.choice([None, round(rng.uniform(1, 60), 1)]),
        guaranteed_availability_pct=rng.choice([None, round(rng.uniform(99.0, 99.9999), 4)]),
        guaranteed_throughput_mbps=rng.choice([None, round(rng.uniform(10, 2000), 1)]),
        isolation_supported=rng.choice([("shared",), ("dedicated",), ("shared", "dedicated")]),
        compliance_tags=rng.choice([(), ("eu-data-residency",)]),
    )


def test_criterion_4_matching_equals_exhaustive_oracle():
    """100 random catalogs of up to 1000 offers: the marketplace returns
    exactly what brute-force filter-and-sort returns."""
    rng = random.Random(RNG_SEED + 1)
    for round_no in range(100):
        offers = [_random_offer(rng, i) for i in range(rng.randint(1, 1000))]
        market = Marketplace()
        for offer in offers:
            market.publish_offer(offer)
        intent = SliceIntent(
            tenant_id="default",
            region=rng.choice(REGIONS + ["atlantis"]),
            service_class=rng.choice(CLASSES),
            duration_hours=round(rng.uniform(0.25, 72), 2),
            budget_amount=rng.randint(0, 200000),
            budget_currency=rng.choice(["EUR", "USD"]),
            latency_slo_ms=rng.choice([None, round(rng.uniform(1, 60), 1)]),
            availability_slo_pct=rng.choice([None, round(rng.uniform(99.0, 99.9999), 4)]),
            throughput_slo_mbps=rng.choice([None, round(rng.uniform(10, 2000), 1)]),
            isolation_level=rng.choice(["shared", "dedicated"]),
        )
        got = [(m.total_cost_minor_units, m.offer.offer_id) for m in market.match(intent)]
        assert got == _oracle_match(offers, intent), f"catalog {round_no} diverged"


# -- criterion 5: state machine table and failure injection --------------------

# the full transition table, restated
TABLE = {
    ("Planned", "DeployStart"): "Deploying",
    ("Deploying", "AllHealthy"): "Active",
    ("Deploying", "UnitFailed"): "RollingBack",
    ("RollingBack", "RollbackDone"): "Failed",
    ("Active", "ViolationDetected"): "Degraded",
    ("Degraded", "RemediationStart"): "Healing",
    ("Healing", "HealthRestored"): "Active",
    ("Healing", "RemediationFailed"): "Degraded",
    ("Planned", "TerminateRequest"): "Terminated",
    ("Deploying", "TerminateRequest"): "Terminated",
    ("Active", "TerminateRequest"): "Terminated",
    ("Degraded", "TerminateRequest"): "Terminated",
    ("Healing", "TerminateRequest"): "Terminated",
    ("RollingBack", "TerminateRequest"): "Terminated",
    ("Failed", "TerminateRequest"): "Terminated",
}


def _manifest(unit_id, cpu):
    return {
        "labels": {"slice_id": "ord-000001", "unit_id": unit_id},
        "replicas": 1,
        "cpu_request_millicores": cpu,
        "memory_request_mib": 256,
        "region_placement": "stockholm",
    }


def test_criterion_5_state_machine_table_and_failure_injection():
    """Every (state, event) pair behaves per the table; after every
    injected deploy failure the backend's live units equal the record's."""
    for state in STATES:
        for event in EVENTS:
            if (state, event) in TABLE:
                assert next_state(state, event) == TABLE[(state, event)]
            else:
                with pytest.raises(InvalidTransition):
                    next_state(state, event)
    assert len(TABLE) == 15

    unit_ids = ["core_control", "core_user_plane", "slice_gateway"]
    for fail_at in range(len(unit_ids)):
        for mode in ("placement", "health"):
            backend = SimBackend([SimCluster("sto-a", "stockholm", 8000, 8192)])
            orch = Orchestrator(backend)
            orch.create_record("ord-000001")
            units = tuple(
                DeploymentUnit(
                    u, u, _manifest(u, 50000 if (mode == "placement" and i == fail_at) else 500)
                )
                for i, u in enumerate(unit_ids)
            )
            if mode == "health":
                backend.set_unit_health("ord-000001", unit_ids[fail_at], True)
            blueprint = Blueprint(
                blueprint_id="bp-1",
                order_id="ord-000001",
                units=units,
                dependency_edges=tuple(zip(unit_ids, unit_ids[1:])),
            )
            record = orch.deploy(blueprint, "low_latency")
            assert record.state == "Failed"
            assert set(backend.live_handles()) == {
                u["handle"] for u in record.deployed_units.values()
            }
            assert backend.at_initial_capacity()


# -- criterion 6: tamper evidence ----------------------------------------------


def test_criterion_6_tamper_detection_single_byte(tmp_path):
    """Any single-byte change anywhere in a 500-record log is detected,
    and the first bad sequence number is exactly the record hit."""
    path = tmp_path / "audit.jsonl"
    log = AuditLog(str(path))
    for i in range(500):
        log.append(
            {"kind": "entry", "i": i, "note": f"zäh €{i}", "nested": {"a": i % 7, "b": [i, i * 2]}},
            timestamp=i,
        )
    log.close()
    ok, first_bad = verify_audit_chain(str(path))
    assert ok and first_bad is None

    original = path.read_bytes()
    # newline at the end of line k belongs to record k
    line_of_byte = []
    line_no = 0
    for byte in original:
        line_of_byte.append(line_no)
        if byte == 0x0A:
            line_no += 1

    rng = random.Random(RNG_SEED + 2)
    target = tmp_path / "tampered.jsonl"
    for _ in range(400):
        pos = rng.randrange(len(original))
        replacement = rng.randrange(256)
        while replacement == original[pos]:
            replacement = rng.randrange(256)
        mutated = bytearray(original)
        mutated[pos] = replacement
        target.write_bytes(bytes(mutated))
        ok, first_bad = verify_audit_chain(str(target))
        assert ok is False, f"mutation at byte {pos} went undetected"
        assert first_bad == line_of_byte[pos], (
            f"byte {pos}: reported seq {first_bad}, expected {line_of_byte[pos]}"
        )


# -- criterion 7: crash-replay reconstruction -----------------------------------


def test_criterion_7_crash_replay_reconstruction(tmp_path, canonical_scenario):
    """Rebuilding from each of 50 audit-log prefixes reproduces the slice
    state the live run had at that point."""
    live_dir = tmp_path / "live"
    live_dir.mkdir()
    config = make_config(live_dir)
    plane = ControlPlane(config)
    snapshots = {}
    try:
        body = plane.submit_text(STOCKHOLM_TEXT)["result"]
        slice_id = body["order"]["order_id"]
        plane.sim.bind_scenario(resolve_scenario(canonical_scenario, slice_id))
        for tick in range(1, 121):
            plane.pump_tick()
            snapshots[tick] = (
                plane.audit.next_seq,
                json.loads(json.dumps(plane.slice_payloads())),
            )
    finally:
        plane.close()

    audit_lines = (live_dir / "audit.jsonl").read_bytes().splitlines(keepends=True)
    checkpoints = list(range(21, 121, 2))
    assert len(checkpoints) == 50

    for index, tick in enumerate(checkpoints):
        record_count, expected_slices = snapshots[tick]
        replay_dir = tmp_path / f"replay{index}"
        replay_dir.mkdir()
        (replay_dir / "audit.jsonl").write_bytes(b"".join(audit_lines[:record_count]))
        reborn = ControlPlane(make_config(replay_dir))
        try:
            rebuilt = json.loads(json.dumps(reborn.slice_payloads()))
            assert rebuilt == expected_slices, f"checkpoint at tick {tick}"
            assert reborn.verify_audit()["ok"] is True
        finally:
            reborn.close()


# -- criterion 8: simulator capacity conservation --------------------------------


def test_criterion_8_simulator_capacity_conservation():
    """10000 random apply/scale/teardown operations never oversubscribe a
    cluster, and tearing everything down returns to the initial capacity."""
    rng = random.Random(RNG_SEED + 3)
    sim = SimBackend.from_fixture(str(FIXTURES / "clusters.json"))
    live = {}
    ops = 0
    for _ in range(10000):
        ops += 1
        kind = rng.choice(["apply", "apply", "scale", "teardown"])
        if kind == "apply":
            unit_id = f"u{rng.randint(0, 79)}"
            manifest = {
                "labels": {"slice_id": "ord-000001", "unit_id": unit_id},
                "replicas": rng.randint(1, 3),
                "cpu_request_millicores": rng.choice([250, 500, 1000, 2000]),
                "memory_request_mib": rng.choice([256, 512, 1024]),
                "region_placement": rng.choice(
                    ["stockholm", "oslo", "gothenburg", "nowhere"]
                ),
            }
            try:
                live[unit_id] = sim.apply_unit(manifest)
            except (PlacementFailed, NoClusterInRegion):
                pass
        elif kind == "scale" and live:
            handle = live[rng.choice(sorted(live))]
            try:
                sim.scale(handle, rng.randint(1, 6))
            except PlacementFailed:
                pass
        elif kind == "teardown" and live:
            unit_id = rng.choice(sorted(live))
            sim.teardown(live.pop(unit_id))
        assert sim.capacity_ok(), f"capacity exceeded after op {ops}"
    assert ops >= 10000
    for handle in live.values():
        sim.teardown(handle)
    assert sim.at_initial_capacity()
    assert sim.live_handles() == []
