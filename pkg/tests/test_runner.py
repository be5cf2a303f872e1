"""Closed-loop runner tests."""

import pytest

from sliceplane.runner import (
    DEFAULT_INTENT_TEXT,
    export_event_lines,
    resolve_scenario,
    run_closed_loop,
)

from conftest import make_config


def test_resolve_scenario_substitutes_the_placeholder():
    doc = {
        "seed": 9,
        "timeline": [
            {"tick": 5, "kind": "latency_shift", "slice_id": "@slice", "magnitude": 2.0},
            {"tick": 7, "kind": "load_spike", "slice_id": "ord-000777", "magnitude": 1.5},
        ],
    }
    scenario = resolve_scenario(doc, "ord-000042")
    assert scenario.seed == 9
    assert scenario.timeline[0].slice_id == "ord-000042"
    assert scenario.timeline[1].slice_id == "ord-000777"


def test_run_summary_shape(tmp_path, canonical_scenario):
    summary = run_closed_loop(
        make_config(tmp_path), scenario_doc=canonical_scenario, ticks=120
    )
    assert summary["slice_id"] == summary["order"]["order_id"]
    assert summary["ticks_run"] == 120
    assert summary["final_state"] == "Active"
    assert len(summary["windows"]) == 12
    assert [v["tick"] for v in summary["violations"]] == [79]
    assert [a["tick"] for a in summary["actions"]] == [79]
    assert summary["deployed_units"]["core_user_plane"]["replicas"] == 3
    assert summary["audit"]["ok"] is True
    assert [t["to"] for t in summary["transitions"]] == [
        "Deploying", "Active", "Degraded", "Healing", "Active",
    ]


def test_unprovisionable_text_returns_no_slice(tmp_path):
    summary = run_closed_loop(
        make_config(tmp_path), text="Any offers in Oslo?", ticks=3
    )
    assert summary["slice_id"] is None
    assert summary["final_state"] is None
    assert summary["violations"] == []
    assert summary["audit"]["ok"] is True


def test_negative_ticks_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_closed_loop(make_config(tmp_path), ticks=-1)


def test_exported_lines_cover_the_whole_run(tmp_path, canonical_scenario):
    config = make_config(tmp_path)
    run_closed_loop(config, scenario_doc=canonical_scenario, ticks=120)
    lines = export_event_lines(config.audit_log_path)
    assert len(lines) == 11
    assert all(line.endswith("\n") for line in lines)


def test_default_text_is_the_checked_in_demo_request(golden_intents):
    pinned = [e for e in golden_intents if e["text"] == DEFAULT_INTENT_TEXT]
    assert len(pinned) == 1
    assert pinned[0]["tool"] == "request_slice"
