from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sliceplane.policy import (
    MalformedRule,
    PolicyRule,
    evaluate,
    load_rules,
    order_subject,
    action_subject,
)
from tests.conftest import FIXTURES


def order(tenant="t1", region="stockholm", cost=1000, isolation="shared", tags=()):
    return order_subject(tenant, region, cost, isolation, tags)


def rule(kind, scope="*", **params):
    rule_ids = rule.__dict__.setdefault("counter", [0])
    rule_ids[0] += 1
    return PolicyRule(
        rule_id=f"r-{rule_ids[0]:03d}", tenant_scope=scope, kind=kind, parameters=params
    )


def test_no_rules_means_allow():
    verdict = evaluate(order(), [])
    assert verdict.verdict == "allow"
    assert verdict.evaluated_rules == ()
    assert verdict.reasons == ()


def test_budget_cap_pass_and_fail():
    r = rule("budget_cap", amount=5000)
    assert evaluate(order(cost=5000), [r]).verdict == "allow"
    v = evaluate(order(cost=5001), [r])
    assert v.verdict == "deny"
    assert v.reasons == ("budget_cap_exceeded",)


def test_permitted_regions():
    r = rule("permitted_regions", regions=["stockholm", "oslo"])
    assert evaluate(order(region="oslo"), [r]).verdict == "allow"
    v = evaluate(order(region="helsinki"), [r])
    assert v.reasons == ("region_not_permitted",)


def test_min_isolation():
    r = rule("min_isolation", level="dedicated")
    assert evaluate(order(isolation="dedicated"), [r]).verdict == "allow"
    v = evaluate(order(isolation="shared"), [r])
    assert v.reasons == ("isolation_below_minimum",)


def test_compliance_tag():
    r = rule("compliance_tag", tag="eu-data-residency")
    assert evaluate(order(tags=("eu-data-residency",)), [r]).verdict == "allow"
    v = evaluate(order(tags=("iso-27001",)), [r])
    assert v.reasons == ("missing_compliance_tag",)


def test_action_allowlist():
    r = rule("action_allowlist", actions=["scale_out"])
    assert evaluate(action_subject("t1", "scale_out"), [r]).verdict == "allow"
    v = evaluate(action_subject("t1", "reboot_everything"), [r])
    assert v.reasons == ("action_not_allowed",)


def test_tenant_scoping():
    r = rule("budget_cap", scope="other-tenant", amount=0)
    # out-of-scope rule is not evaluated at all
    v = evaluate(order(tenant="t1", cost=10**9), [r])
    assert v.verdict == "allow"
    assert v.evaluated_rules == ()


def test_subject_type_scoping():
    # order rules never apply to actions and vice versa
    budget = rule("budget_cap", amount=0)
    allowlist = rule("action_allowlist", actions=[])
    v = evaluate(action_subject("t1", "scale_out"), [budget])
    assert v.verdict == "allow"
    v2 = evaluate(order(cost=0), [allowlist])
    assert v2.verdict == "allow"


def test_all_in_scope_rules_evaluated_no_short_circuit():
    rules = [
        rule("budget_cap", amount=0),
        rule("permitted_regions", regions=[]),
        rule("min_isolation", level="dedicated"),
    ]
    v = evaluate(order(cost=1), rules)
    assert v.verdict == "deny"
    assert len(v.evaluated_rules) == 3
    assert v.reasons == (
        "budget_cap_exceeded",
        "region_not_permitted",
        "isolation_below_minimum",
    )


def test_malformed_parameters_raise():
    with pytest.raises(MalformedRule):
        evaluate(order(), [rule("budget_cap", amount="lots")])
    with pytest.raises(MalformedRule):
        evaluate(order(), [rule("permitted_regions", regions="stockholm")])
    with pytest.raises(MalformedRule):
        evaluate(order(), [rule("min_isolation", level="ultra")])


def test_unknown_kind_rejected_at_construction():
    with pytest.raises(MalformedRule):
        PolicyRule(rule_id="r", tenant_scope="*", kind="chaos_monkey", parameters={})


def test_load_fixture_rules():
    rules = load_rules(str(FIXTURES / "policies.json"))
    assert [r.rule_id for r in rules] == ["pol-001", "pol-002", "pol-003"]
    v = evaluate(order(cost=10000), rules)
    assert v.verdict == "allow"
    v2 = evaluate(order(region="helsinki", cost=10000), rules)
    assert v2.reasons == ("region_not_permitted",)


def test_verdict_payload_shape():
    v = evaluate(order(cost=10**9), [rule("budget_cap", amount=1)])
    payload = v.to_payload()
    assert payload["verdict"] == "deny"
    assert payload["reasons"] == ["budget_cap_exceeded"]
    assert payload["evaluated_rules"][0]["result"] == "fail"


_rule_strategy = st.one_of(
    st.builds(lambda a: rule("budget_cap", amount=a), st.integers(min_value=0, max_value=5000)),
    st.builds(
        lambda rs: rule("permitted_regions", regions=rs),
        st.lists(st.sampled_from(["stockholm", "oslo", "helsinki"]), max_size=3),
    ),
    st.builds(lambda lv: rule("min_isolation", level=lv), st.sampled_from(["shared", "dedicated"])),
)


@settings(max_examples=200, deadline=None)
@given(
    rules=st.lists(_rule_strategy, max_size=5),
    extra=_rule_strategy,
    cost=st.integers(min_value=0, max_value=10000),
    region=st.sampled_from(["stockholm", "oslo", "helsinki"]),
)
def test_adding_a_rule_never_turns_deny_into_allow(rules, extra, cost, region):
    subject = order(cost=cost, region=region)
    before = evaluate(subject, rules).verdict
    after = evaluate(subject, rules + [extra]).verdict
    if before == "deny":
        assert after == "deny"
