"""Tenant governance rules and explainable allow/deny verdicts.

Semantics are conjunctive and default-allow: with no rules in scope
everything passes, and every in-scope rule must pass for an allow.  All
in-scope rules are evaluated even after a failure so the verdict always
carries the complete picture.  Adding a rule can therefore only ever
turn an allow into a deny, never the reverse.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

from .errors import SlicePlaneError

logger = logging.getLogger(__name__)

RULE_KINDS = (
    "budget_cap",
    "permitted_regions",
    "min_isolation",
    "compliance_tag",
    "action_allowlist",
)

# which rule kinds apply to which subject type
_ORDER_KINDS = ("budget_cap", "permitted_regions", "min_isolation", "compliance_tag")
_ACTION_KINDS = ("action_allowlist",)

_ISOLATION_RANK = {"shared": 0, "dedicated": 1}


class MalformedRule(SlicePlaneError):
    code = "malformed_rule"

    def __init__(self, rule_id: str, message: str):
        super().__init__(f"rule {rule_id!r}: {message}")
        self.rule_id = rule_id


@dataclass(frozen=True)
class PolicyRule:
    rule_id: str
    tenant_scope: str  # tenant id or "*"
    kind: str
    parameters: dict

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise MalformedRule(self.rule_id, f"unknown kind {self.kind!r}")

    def in_scope(self, tenant_id: str, subject_type: str) -> bool:
        if self.tenant_scope not in ("*", tenant_id):
            return False
        if subject_type == "order":
            return self.kind in _ORDER_KINDS
        return self.kind in _ACTION_KINDS


@dataclass(frozen=True)
class PolicyVerdict:
    verdict: str  # allow | deny
    evaluated_rules: tuple
    reasons: tuple

    def to_payload(self) -> dict:
        return {
            "verdict": self.verdict,
            "evaluated_rules": [dict(r) for r in self.evaluated_rules],
            "reasons": list(self.reasons),
        }


def order_subject(
    tenant_id: str,
    region: str,
    total_cost_minor_units: int,
    isolation_level: str,
    offer_compliance_tags: tuple = (),
) -> dict:
    return {
        "type": "order",
        "tenant_id": tenant_id,
        "region": region,
        "total_cost_minor_units": total_cost_minor_units,
        "isolation_level": isolation_level,
        "offer_compliance_tags": tuple(offer_compliance_tags),
    }


def action_subject(tenant_id: str, action: str) -> dict:
    return {"type": "action", "tenant_id": tenant_id, "action": action}


def _apply_rule(rule: PolicyRule, subject: dict) -> tuple[bool, str]:
    """Returns (passed, reason slug when failed)."""
    p = rule.parameters
    if rule.kind == "budget_cap":
        amount = p.get("amount")
        if not isinstance(amount, int) or amount < 0:
            raise MalformedRule(rule.rule_id, "budget_cap needs a non-negative integer amount")
        if subject["total_cost_minor_units"] > amount:
            return False, "budget_cap_exceeded"
        return True, ""
    if rule.kind == "permitted_regions":
        regions = p.get("regions")
        if not isinstance(regions, list) or not all(isinstance(r, str) for r in regions):
            raise MalformedRule(rule.rule_id, "permitted_regions needs a list of region codes")
        if subject["region"] not in regions:
            return False, "region_not_permitted"
        return True, ""
    if rule.kind == "min_isolation":
        level = p.get("level")
        if level not in _ISOLATION_RANK:
            raise MalformedRule(rule.rule_id, "min_isolation needs level shared or dedicated")
        if _ISOLATION_RANK[subject["isolation_level"]] < _ISOLATION_RANK[level]:
            return False, "isolation_below_minimum"
        return True, ""
    if rule.kind == "compliance_tag":
        tag = p.get("tag")
        if not isinstance(tag, str) or not tag:
            raise MalformedRule(rule.rule_id, "compliance_tag needs a non-empty tag")
        if tag not in subject["offer_compliance_tags"]:
            return False, "missing_compliance_tag"
        return True, ""
    if rule.kind == "action_allowlist":
        actions = p.get("actions")
        if not isinstance(actions, list) or not all(isinstance(a, str) for a in actions):
            raise MalformedRule(rule.rule_id, "action_allowlist needs a list of action names")
        if subject["action"] not in actions:
            return False, "action_not_allowed"
        return True, ""
    raise MalformedRule(rule.rule_id, f"unknown kind {rule.kind!r}")


def evaluate(subject: dict, rules: list[PolicyRule]) -> PolicyVerdict:
    """Evaluate every in-scope rule; no short-circuiting.

    Deny iff at least one in-scope rule fails.  ``reasons`` lists one
    slug per failing rule, in rule order.
    """
    tenant_id = subject["tenant_id"]
    subject_type = subject["type"]
    evaluated = []
    reasons = []
    for rule in rules:
        if not rule.in_scope(tenant_id, subject_type):
            continue
        passed, reason = _apply_rule(rule, subject)
        evaluated.append({"rule_id": rule.rule_id, "result": "pass" if passed else "fail"})
        if not passed:
            reasons.append(reason)
    verdict = "deny" if reasons else "allow"
    return PolicyVerdict(
        verdict=verdict, evaluated_rules=tuple(evaluated), reasons=tuple(reasons)
    )


def load_rules(path: str) -> list[PolicyRule]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [
        PolicyRule(
            rule_id=r["rule_id"],
            tenant_scope=r["tenant_scope"],
            kind=r["kind"],
            parameters=r.get("parameters", {}),
        )
        for r in doc["rules"]
    ]
