"""Blueprint planning and consortium-backed manifest generation.

An approved order is expanded into a blueprint by a fixed
service-class template table (documented in the README; sizes are
tunables, not derived from the SLOs).  Each unit's manifest is then
produced by the backend consortium and vetted by the governor using the
exact same checks ``validate_manifest`` applies, so nothing the planner
attaches can fail later validation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from math import ceil
from typing import Callable, Optional

from .backends import Backend, BackendPool, DeterministicBackend
from .canonical import canonical_json
from .consortium import Check, GovernanceDecision, generate_candidates, govern, score_agreement
from .errors import SlicePlaneError
from .market import SliceOrder

logger = logging.getLogger(__name__)

FUNCTION_ROLES = ("core_control", "core_user_plane", "slice_gateway", "telemetry_exporter")

MAX_REPLICAS = 8  # runtime scale ceiling, enforced here and at remediation

# service class -> ordered (role, replicas, cpu_request_millicores,
# memory_request_mib); list order is a valid topological order of the DAG
TEMPLATES = {
    "low_latency": (
        ("core_control", 1, 500, 512),
        ("core_user_plane", 2, 1000, 1024),
        ("slice_gateway", 1, 500, 512),
        ("telemetry_exporter", 1, 250, 256),
    ),
    "high_reliability": (
        ("core_control", 2, 500, 512),
        ("core_user_plane", 2, 750, 768),
        ("slice_gateway", 2, 500, 512),
        ("telemetry_exporter", 1, 250, 256),
    ),
    "high_throughput": (
        ("core_control", 1, 500, 512),
        ("core_user_plane", 3, 1500, 2048),
        ("slice_gateway", 1, 750, 768),
        ("telemetry_exporter", 1, 250, 256),
    ),
    "best_effort": (
        ("core_control", 1, 250, 256),
        ("core_user_plane", 1, 500, 512),
    ),
}

# control feeds the user plane, the user plane feeds the gateway;
# telemetry attaches to nothing
_EDGE_CHAIN = ("core_control", "core_user_plane", "slice_gateway")


class UnknownServiceClass(SlicePlaneError):
    code = "unknown_service_class"


class GovernanceRejected(SlicePlaneError):
    code = "governance_rejected"

    def __init__(self, unit_id: str, decision: GovernanceDecision):
        super().__init__(f"governor rejected every manifest candidate for unit {unit_id!r}")
        self.unit_id = unit_id
        self.decision = decision


@dataclass(frozen=True)
class DeploymentUnit:
    unit_id: str
    function_role: str
    manifest: Optional[dict] = None


@dataclass(frozen=True)
class Blueprint:
    blueprint_id: str
    order_id: str
    units: tuple
    dependency_edges: tuple  # (from_unit_id, to_unit_id) pairs
    rollback_strategy: str = "reverse_order_teardown"
    unplannable: bool = False

    def unit(self, unit_id: str) -> Optional[DeploymentUnit]:
        for u in self.units:
            if u.unit_id == unit_id:
                return u
        return None

    def to_payload(self) -> dict:
        return {
            "blueprint_id": self.blueprint_id,
            "order_id": self.order_id,
            "units": [
                {
                    "unit_id": u.unit_id,
                    "function_role": u.function_role,
                    "manifest": u.manifest,
                }
                for u in self.units
            ],
            "dependency_edges": [list(e) for e in self.dependency_edges],
            "rollback_strategy": self.rollback_strategy,
            "unplannable": self.unplannable,
        }


def slice_namespace(order_id: str) -> str:
    return f"slice-{order_id}"


def plan(order: SliceOrder) -> Blueprint:
    """Expand an approved order into a blueprint with manifests pending."""
    if order.status != "approved":
        raise ValueError(f"order {order.order_id} is {order.status}, not approved")
    template = TEMPLATES.get(order.intent.service_class)
    if template is None:
        raise UnknownServiceClass(
            f"no unit template for service class {order.intent.service_class!r}"
        )
    units = tuple(
        DeploymentUnit(unit_id=role, function_role=role) for role, _, _, _ in template
    )
    present = [u.unit_id for u in units]
    edges = tuple(
        (a, b)
        for a, b in zip(_EDGE_CHAIN, _EDGE_CHAIN[1:])
        if a in present and b in present
    )
    return Blueprint(
        blueprint_id=f"bp-{order.order_id}",
        order_id=order.order_id,
        units=units,
        dependency_edges=edges,
    )


def topological_order(blueprint: Blueprint) -> list[str]:
    """Kahn's algorithm with the blueprint's unit order as tie-break."""
    ids = [u.unit_id for u in blueprint.units]
    incoming = {u: 0 for u in ids}
    for a, b in blueprint.dependency_edges:
        incoming[b] += 1
    out: list[str] = []
    ready = [u for u in ids if incoming[u] == 0]
    while ready:
        u = ready.pop(0)
        out.append(u)
        for a, b in blueprint.dependency_edges:
            if a == u:
                incoming[b] -= 1
                if incoming[b] == 0:
                    ready.append(b)
                    ready.sort(key=ids.index)
    if len(out) != len(ids):
        raise ValueError("dependency edges contain a cycle")
    return out


# ---------------------------------------------------------------------------
# manifest checks: single source of truth for the governor and
# validate_manifest
# ---------------------------------------------------------------------------

def _has_limits(m: dict) -> bool:
    return (
        m.get("cpu_limit_millicores") is not None
        and m.get("memory_limit_mib") is not None
        and m.get("cpu_request_millicores") is not None
        and m.get("memory_request_mib") is not None
    )


def _limits_cover_requests(m: dict) -> bool:
    if not _has_limits(m):
        return True  # absence already reported by missing-resource-limits
    return (
        m["cpu_limit_millicores"] >= m["cpu_request_millicores"]
        and m["memory_limit_mib"] >= m["memory_request_mib"]
    )


def _valid_replicas(m: dict) -> bool:
    r = m.get("replicas")
    return isinstance(r, int) and not isinstance(r, bool) and 1 <= r <= MAX_REPLICAS


def build_manifest_checks(order: SliceOrder) -> list[Check]:
    ns = slice_namespace(order.order_id)
    region = order.intent.region
    isolation = order.intent.isolation_level
    slice_id = order.order_id
    return [
        Check("missing-resource-limits", _has_limits),
        Check("limits-below-requests", _limits_cover_requests),
        Check("invalid-replica-count", _valid_replicas),
        Check("namespace-scope-violation", lambda m: m.get("namespace") == ns),
        Check("region-placement-violation", lambda m: m.get("region_placement") == region),
        Check("isolation-mismatch", lambda m: m.get("isolation") == isolation),
        Check(
            "missing-slice-id-label",
            lambda m: isinstance(m.get("labels"), dict)
            and m["labels"].get("slice_id") == slice_id,
        ),
    ]


def validate_manifest(manifest: dict, order: SliceOrder) -> list[str]:
    """Every failed check name, in check order; empty means pass."""
    return [c.name for c in build_manifest_checks(order) if c.failed(manifest)]


# ---------------------------------------------------------------------------
# consortium-backed manifest generation
# ---------------------------------------------------------------------------

def unit_prompt(order: SliceOrder, unit: DeploymentUnit) -> str:
    """Canonical prompt shared verbatim by every consortium member."""
    template = TEMPLATES[order.intent.service_class]
    row = next(r for r in template if r[0] == unit.function_role)
    return canonical_json(
        {
            "task": "manifest_generation",
            "order_id": order.order_id,
            "unit_id": unit.unit_id,
            "function_role": unit.function_role,
            "namespace": slice_namespace(order.order_id),
            "region": order.intent.region,
            "isolation": order.intent.isolation_level,
            "replicas": row[1],
            "cpu_request_millicores": row[2],
            "memory_request_mib": row[3],
        }
    )


def generate_manifests(
    blueprint: Blueprint,
    order: SliceOrder,
    pool: BackendPool,
    n: int = 3,
    on_decision: Optional[Callable[[str, GovernanceDecision, list], None]] = None,
) -> Blueprint:
    """Fill every unit's manifest through generate/score/govern.

    ``on_decision(unit_id, decision, candidates)`` fires for every unit,
    including the rejecting one, so callers can audit the full trail.
    Raises GovernanceRejected on the first unit where nothing passes;
    the blueprint inside the exception's decision context is marked
    unplannable by the caller.
    """
    checks = build_manifest_checks(order)
    filled = []
    for unit in blueprint.units:
        prompt = unit_prompt(order, unit)
        candidates = generate_candidates("manifest_generation", prompt, pool, n)
        well_formed = [c for c in candidates if not c.malformed]
        report = None
        if len(well_formed) >= 2:
            report = score_agreement(candidates)
        decision = govern(candidates, checks, report)
        if on_decision is not None:
            on_decision(unit.unit_id, decision, candidates)
        if decision.outcome != "selected":
            raise GovernanceRejected(unit.unit_id, decision)
        filled.append(replace(unit, manifest=decision.chosen))
    return replace(blueprint, units=tuple(filled))


# ---------------------------------------------------------------------------
# mock manifest backends
# ---------------------------------------------------------------------------

def _render_manifest(prompt: str, seed: int) -> str:
    """Shared render: scale template requests by the member's headroom.

    headroom = 1 + seed/20, so seeds 0, 1, 2 give factors 1.0, 1.05,
    1.10: structurally identical manifests at slightly different sizes,
    which the governor resolves by declared-cost ranking.
    """
    spec = json.loads(prompt)
    factor = 1 + seed / 20
    cpu = ceil(spec["cpu_request_millicores"] * factor)
    mem = ceil(spec["memory_request_mib"] * factor)
    manifest = {
        "namespace": spec["namespace"],
        "replicas": spec["replicas"],
        "cpu_request_millicores": cpu,
        "memory_request_mib": mem,
        "cpu_limit_millicores": cpu,
        "memory_limit_mib": mem,
        "region_placement": spec["region"],
        "isolation": spec["isolation"],
        "labels": {"slice_id": spec["order_id"], "unit_id": spec["unit_id"]},
    }
    return canonical_json(manifest)


def manifest_backend(name: str, seed: int) -> Backend:
    return DeterministicBackend(name=name, seed=seed, render=_render_manifest)


FAULT_MODES = ("omit_limits", "wrong_namespace", "low_limits", "drop_label", "garbage")


@dataclass(frozen=True)
class FaultyManifestBackend:
    """Produces a specific defect on top of the shared render; test-only."""

    name: str
    mode: str
    seed: int = 0

    def __post_init__(self):
        if self.mode not in FAULT_MODES:
            raise ValueError(f"unknown fault mode {self.mode!r}")

    def complete(self, prompt: str) -> str:
        if self.mode == "garbage":
            return "### no manifest here ###"
        manifest = json.loads(_render_manifest(prompt, self.seed))
        if self.mode == "omit_limits":
            manifest.pop("cpu_limit_millicores")
            manifest.pop("memory_limit_mib")
        elif self.mode == "wrong_namespace":
            manifest["namespace"] = "default"
        elif self.mode == "low_limits":
            manifest["cpu_limit_millicores"] = manifest["cpu_request_millicores"] - 1
        elif self.mode == "drop_label":
            manifest["labels"] = {}
        return canonical_json(manifest)
