from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sliceplane.backends import BackendPool, BackendUnavailable, FailingBackend, MalformedBackend, PoolMember
from sliceplane.intents import (
    EmptyIntent,
    MissingRequiredField,
    SliceIntent,
    UnmappableIntent,
    extract_intent,
    intent_backend,
    normalize_intent,
    parse_intent,
)
from tests.conftest import OSLO_TEXT, STOCKHOLM_TEXT


def test_stockholm_example_maps_exactly():
    ext = extract_intent(STOCKHOLM_TEXT)
    assert ext.call.tool == "request_slice"
    assert ext.call.params == {
        "region": "stockholm",
        "service_class": "low_latency",
        "use_case": "autonomous_vehicle_testing",
        "duration_hours": 2,
        "latency_slo_ms": 10,
        "budget_amount": 12000,
        "budget_currency": "EUR",
    }


def test_oslo_example_maps_exactly():
    ext = extract_intent(OSLO_TEXT)
    assert ext.call.tool == "request_slice"
    assert ext.call.params == {
        "region": "oslo",
        "service_class": "high_reliability",
        "use_case": "remote_surgery",
        "duration_hours": 1,
        "availability_slo_pct": 99.999,
        "budget_amount": 30000,
        "budget_currency": "EUR",
    }


def test_golden_corpus(golden_intents):
    for entry in golden_intents:
        text = entry["text"]
        if "error" in entry:
            with pytest.raises((EmptyIntent, UnmappableIntent)) as exc_info:
                extract_intent(text)
            assert exc_info.value.code == entry["error"], text
            continue
        ext = extract_intent(text)
        assert ext.call.tool == entry["tool"], text
        assert ext.call.params == entry["params"], text


def test_every_param_has_a_source_span(golden_intents):
    # anti-fabrication: a parameter without supporting text must not exist
    for entry in golden_intents:
        if "error" in entry:
            continue
        ext = extract_intent(entry["text"])
        lowered = entry["text"].lower()
        assert set(ext.spans) == set(ext.call.params)
        for field, (start, end) in ext.spans.items():
            assert 0 <= start < end <= len(lowered), (field, entry["text"])
            assert lowered[start:end].strip(), (field, entry["text"])


def test_spans_point_at_the_evidence():
    ext = extract_intent(STOCKHOLM_TEXT)
    low = STOCKHOLM_TEXT.lower()
    snip = lambda f: low[ext.spans[f][0] : ext.spans[f][1]]
    assert snip("region") == "stockholm"
    assert snip("service_class") == "low-latency"
    assert snip("budget_amount") == "120"
    assert snip("budget_currency") == "€"
    assert snip("use_case") == "autonomous vehicle testing"


def test_extraction_is_pure():
    outputs = {str(extract_intent(STOCKHOLM_TEXT).call.params) for _ in range(20)}
    assert len(outputs) == 1


def test_empty_text_raises_empty_intent():
    with pytest.raises(EmptyIntent):
        extract_intent("")
    with pytest.raises(EmptyIntent):
        extract_intent("   \n\t ")


def test_conflicting_values_are_unmappable():
    with pytest.raises(UnmappableIntent):
        extract_intent("Low latency slice in Stockholm and Oslo for 2 hours, budget €10")


def test_terminate_requires_slice_token():
    with pytest.raises(UnmappableIntent):
        extract_intent("terminate the slice please")


def test_gibberish_is_unmappable_not_guessed():
    with pytest.raises(UnmappableIntent):
        extract_intent("colorless green ideas sleep furiously")


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=200))
def test_extractor_never_crashes(text):
    try:
        ext = extract_intent(text)
    except (EmptyIntent, UnmappableIntent):
        return
    assert ext.call.tool


def test_parse_intent_through_backend_pool():
    pool = BackendPool([PoolMember(intent_backend(), "intent_mapping")])
    call = parse_intent(STOCKHOLM_TEXT, pool)
    assert call.tool == "request_slice"
    assert call.origin == "agent"
    assert call.provenance == STOCKHOLM_TEXT


def test_failing_backend_surfaces_unavailable():
    pool = BackendPool([PoolMember(FailingBackend("dead"), "intent_mapping")])
    with pytest.raises(BackendUnavailable):
        parse_intent(STOCKHOLM_TEXT, pool)


def test_malformed_backend_output_is_unmappable():
    pool = BackendPool([PoolMember(MalformedBackend("garbled"), "intent_mapping")])
    with pytest.raises(UnmappableIntent):
        parse_intent(STOCKHOLM_TEXT, pool)


# -- normalization -----------------------------------------------------------


def test_normalize_defaults():
    intent = normalize_intent(
        {
            "region": "Stockholm",
            "service_class": "best_effort",
            "duration_hours": 2,
            "budget_amount": 1000,
        },
        tenant_id="t9",
    )
    assert intent.region == "stockholm"
    assert intent.budget_currency == "EUR"
    assert intent.isolation_level == "shared"
    assert intent.tenant_id == "t9"


def test_normalize_missing_fields_listed():
    with pytest.raises(MissingRequiredField) as exc_info:
        normalize_intent({"region": "oslo"})
    assert "service_class" in exc_info.value.fields
    assert "duration_hours" in exc_info.value.fields
    assert "budget_amount" in exc_info.value.fields


def test_guaranteed_classes_need_an_slo():
    base = {
        "region": "oslo",
        "service_class": "low_latency",
        "duration_hours": 1,
        "budget_amount": 1000,
    }
    with pytest.raises(MissingRequiredField):
        normalize_intent(base)
    ok = normalize_intent({**base, "latency_slo_ms": 10})
    assert ok.latency_slo_ms == 10
    # best_effort carries no such requirement
    normalize_intent({**base, "service_class": "best_effort"})


def test_slice_intent_validates_fields():
    with pytest.raises(ValueError):
        SliceIntent(
            tenant_id="t", region="oslo", service_class="warp_speed",
            duration_hours=1, budget_amount=1, budget_currency="EUR",
        )
    with pytest.raises(ValueError):
        SliceIntent(
            tenant_id="t", region="oslo", service_class="best_effort",
            duration_hours=0, budget_amount=1, budget_currency="EUR",
        )
    with pytest.raises(ValueError):
        SliceIntent(
            tenant_id="t", region="oslo", service_class="best_effort",
            duration_hours=1, budget_amount=1, budget_currency="EUR",
            availability_slo_pct=101,
        )
