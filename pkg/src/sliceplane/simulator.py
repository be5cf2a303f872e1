"""Deterministic infrastructure simulator.

Models regional clusters with finite CPU/memory capacity, executes unit
lifecycle calls, and emits per-slice telemetry on a logical clock.
Everything observable is a pure function of (seed, scenario, operation
sequence); jitter comes from hashing, not from a shared RNG stream, so
interleaving does not perturb values.

Telemetry model (per slice, per tick), with r = live core_user_plane
replicas, r0 = the replica count it was first applied with, and
load = spike_factor * r0 / r:

    latency_ms       = base_latency * load + latency_shift_sum + j,  |j| <= 0.5
    throughput_mbps  = base_throughput / load + j,                   |j| <= 1.0
    availability_pct = base_availability - 2.0 * unhealthy_units + j, |j| <= 0.0003
    utilization_pct  = 40.0 * load + j,                              |j| <= 1.0

Availability and utilization are clamped to [0, 100]; latency and
throughput are clamped at 0.  Scale-out therefore lowers latency and
raises throughput, which is what makes remediation observable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .canonical import stable_unit_interval
from .errors import SlicePlaneError

logger = logging.getLogger(__name__)

# per service class: base latency ms, base throughput mbps, base availability pct
SERVICE_BASELINES = {
    "low_latency": (6.0, 200.0, 99.99),
    "high_reliability": (20.0, 100.0, 99.9995),
    "high_throughput": (25.0, 1000.0, 99.95),
    "best_effort": (50.0, 50.0, 99.5),
}

JITTER_BOUNDS = {
    "latency_ms": 0.5,
    "throughput_mbps": 1.0,
    "availability_pct": 0.0003,
    "utilization_pct": 1.0,
}

EFFECT_KINDS = ("latency_shift", "unit_health_flip", "load_spike")


class PlacementFailed(SlicePlaneError):
    code = "placement_failed"


class NoClusterInRegion(SlicePlaneError):
    code = "no_cluster_in_region"


class UnknownHandle(SlicePlaneError):
    code = "unknown_handle"


@dataclass
class SimCluster:
    cluster_id: str
    region: str
    cpu_capacity_millicores: int
    memory_capacity_mib: int
    # handle -> (cpu, memory) totals currently reserved
    allocations: dict = field(default_factory=dict)

    def free_cpu(self) -> int:
        return self.cpu_capacity_millicores - sum(c for c, _ in self.allocations.values())

    def free_memory(self) -> int:
        return self.memory_capacity_mib - sum(m for _, m in self.allocations.values())


@dataclass(frozen=True)
class TimelineEffect:
    tick: int
    kind: str
    slice_id: str = ""
    unit_id: str = ""
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in EFFECT_KINDS:
            raise ValueError(f"unknown effect kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    seed: int
    timeline: tuple

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        effects = [
            TimelineEffect(
                tick=e["tick"],
                kind=e["kind"],
                slice_id=e.get("slice_id", ""),
                unit_id=e.get("unit_id", ""),
                magnitude=e.get("magnitude", 0.0),
            )
            for e in doc.get("timeline", [])
        ]
        effects.sort(key=lambda e: e.tick)
        return cls(seed=doc.get("seed", 0), timeline=tuple(effects))

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TelemetrySample:
    slice_id: str
    tick: int
    latency_ms: float
    throughput_mbps: float
    availability_pct: float
    utilization_pct: float

    def to_payload(self) -> dict:
        return {
            "slice_id": self.slice_id,
            "tick": self.tick,
            "latency_ms": self.latency_ms,
            "throughput_mbps": self.throughput_mbps,
            "availability_pct": self.availability_pct,
            "utilization_pct": self.utilization_pct,
        }


@dataclass
class _UnitState:
    handle: str
    slice_id: str
    unit_id: str
    cluster_id: str
    service_class: str
    replicas: int
    initial_replicas: int
    cpu_per_replica: int
    mem_per_replica: int
    role: str


class SimBackend:
    """The infrastructure backend the orchestrator drives.

    Interface: ping, apply_unit, check_health, scale, teardown, wait.
    Plus simulator-only surface: advance_clock, emit_telemetry, and
    scenario effect application.
    """

    def __init__(self, clusters: list[SimCluster], scenario: Optional[Scenario] = None):
        self._clusters = {c.cluster_id: c for c in clusters}
        self._initial_capacity = {
            c.cluster_id: (c.cpu_capacity_millicores, c.memory_capacity_mib)
            for c in clusters
        }
        self.scenario = scenario or Scenario(seed=0, timeline=())
        self.clock = 0
        self._applied_effects = 0
        self._units: dict[str, _UnitState] = {}
        # (slice_id, unit_id) -> forced-unhealthy flag
        self._unhealthy: dict[tuple, bool] = {}
        # slice_id -> cumulative additive latency shift
        self._latency_shift: dict[str, float] = {}
        # slice_id -> multiplicative load factor
        self._load_factor: dict[str, float] = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def from_fixture(cls, path: str, scenario: Optional[Scenario] = None) -> "SimBackend":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        clusters = [
            SimCluster(
                cluster_id=c["cluster_id"],
                region=c["region"],
                cpu_capacity_millicores=c["cpu_capacity_millicores"],
                memory_capacity_mib=c["memory_capacity_mib"],
            )
            for c in doc["clusters"]
        ]
        return cls(clusters, scenario)

    def bind_scenario(self, scenario: Scenario) -> None:
        """Swap in a new timeline without rewinding the clock.

        Effects dated at or before the current tick are treated as already
        applied, so rebinding mid-run never replays the past.
        """
        self.scenario = scenario
        self._applied_effects = sum(1 for e in scenario.timeline if e.tick <= self.clock)

    # -- backend interface ---------------------------------------------------

    def ping(self) -> bool:
        return True

    def apply_unit(self, manifest: dict, service_class: str = "best_effort") -> str:
        """Reserve capacity and return the unit handle.

        Placement walks the region's clusters in cluster_id order and
        takes the first with room for every replica.  Re-applying the
        same (slice, unit) is idempotent and reserves nothing new.
        """
        labels = manifest.get("labels") or {}
        slice_id = labels.get("slice_id")
        unit_id = labels.get("unit_id")
        if not slice_id or not unit_id:
            raise ValueError("manifest labels must carry slice_id and unit_id")
        handle = f"{slice_id}/{unit_id}"
        if handle in self._units:
            return handle
        region = manifest["region_placement"]
        candidates = sorted(
            (c for c in self._clusters.values() if c.region == region),
            key=lambda c: c.cluster_id,
        )
        if not candidates:
            raise NoClusterInRegion(f"no cluster in region {region!r}")
        replicas = manifest["replicas"]
        cpu_need = replicas * manifest["cpu_request_millicores"]
        mem_need = replicas * manifest["memory_request_mib"]
        target = None
        for cluster in candidates:
            if cluster.free_cpu() >= cpu_need and cluster.free_memory() >= mem_need:
                target = cluster
                break
        if target is None:
            raise PlacementFailed(
                f"no cluster in {region!r} has {cpu_need}m cpu and {mem_need}MiB free"
            )
        target.allocations[handle] = (cpu_need, mem_need)
        self._units[handle] = _UnitState(
            handle=handle,
            slice_id=slice_id,
            unit_id=unit_id,
            cluster_id=target.cluster_id,
            service_class=service_class,
            replicas=replicas,
            initial_replicas=replicas,
            cpu_per_replica=manifest["cpu_request_millicores"],
            mem_per_replica=manifest["memory_request_mib"],
            role=labels.get("unit_id", unit_id),
        )
        return handle

    def check_health(self, handle: str) -> str:
        unit = self._require(handle)
        if self._unhealthy.get((unit.slice_id, unit.unit_id)):
            return "unhealthy"
        return "healthy"

    def scale(self, handle: str, replicas: int) -> None:
        """Re-reserve capacity for the new replica count on the same cluster."""
        if replicas < 1:
            raise ValueError("replicas must be >= 1")
        unit = self._require(handle)
        cluster = self._clusters[unit.cluster_id]
        new_cpu = replicas * unit.cpu_per_replica
        new_mem = replicas * unit.mem_per_replica
        old_cpu, old_mem = cluster.allocations[handle]
        if (
            cluster.free_cpu() + old_cpu < new_cpu
            or cluster.free_memory() + old_mem < new_mem
        ):
            raise PlacementFailed(
                f"cluster {cluster.cluster_id} cannot fit {replicas} replicas of {handle}"
            )
        cluster.allocations[handle] = (new_cpu, new_mem)
        unit.replicas = replicas

    def teardown(self, handle: str) -> None:
        unit = self._units.pop(handle, None)
        if unit is None:
            raise UnknownHandle(f"unit {handle!r} is not deployed")
        del self._clusters[unit.cluster_id].allocations[handle]

    def wait(self, ticks: int) -> int:
        """Block the caller for a backoff interval, in logical time."""
        return self.advance_clock(ticks)

    # -- clock and scenario ---------------------------------------------------

    def advance_clock(self, ticks: int) -> int:
        if ticks < 0:
            raise ValueError("clock cannot move backwards")
        self.clock += ticks
        self._apply_due_effects()
        return self.clock

    def _apply_due_effects(self) -> None:
        while self._applied_effects < len(self.scenario.timeline):
            effect = self.scenario.timeline[self._applied_effects]
            if effect.tick > self.clock:
                break
            self._apply_effect(effect)
            self._applied_effects += 1

    def _apply_effect(self, effect: TimelineEffect) -> None:
        if effect.kind == "latency_shift":
            prev = self._latency_shift.get(effect.slice_id, 0.0)
            self._latency_shift[effect.slice_id] = prev + effect.magnitude
        elif effect.kind == "load_spike":
            self._load_factor[effect.slice_id] = effect.magnitude
        elif effect.kind == "unit_health_flip":
            key = (effect.slice_id, effect.unit_id)
            self._unhealthy[key] = not self._unhealthy.get(key, False)
        logger.debug("applied scenario effect %s at tick %d", effect.kind, self.clock)

    # -- telemetry ------------------------------------------------------------

    def emit_telemetry(self, tick: Optional[int] = None) -> list[TelemetrySample]:
        """One sample per live slice at the current clock value."""
        if tick is None:
            tick = self.clock
        if tick != self.clock:
            raise ValueError(f"clock is at {self.clock}, cannot emit for tick {tick}")
        slices: dict[str, list[_UnitState]] = {}
        for unit in self._units.values():
            slices.setdefault(unit.slice_id, []).append(unit)
        samples = []
        for slice_id in sorted(slices):
            samples.append(self._sample(slice_id, slices[slice_id], tick))
        return samples

    def _sample(self, slice_id: str, units: list[_UnitState], tick: int) -> TelemetrySample:
        service_class = units[0].service_class
        base_lat, base_thr, base_avail = SERVICE_BASELINES[service_class]
        user_plane = [u for u in units if u.unit_id == "core_user_plane"]
        if user_plane:
            r = user_plane[0].replicas
            r0 = user_plane[0].initial_replicas
        else:
            r = r0 = 1
        spike = self._load_factor.get(slice_id, 1.0)
        load = spike * r0 / r
        shift = self._latency_shift.get(slice_id, 0.0)
        unhealthy = sum(
            1 for u in units if self._unhealthy.get((u.slice_id, u.unit_id))
        )

        def jitter(metric: str) -> float:
            u = stable_unit_interval(self.scenario.seed, slice_id, metric, tick)
            return (2 * u - 1) * JITTER_BOUNDS[metric]

        latency = max(0.0, base_lat * load + shift + jitter("latency_ms"))
        throughput = max(0.0, base_thr / load + jitter("throughput_mbps"))
        availability = min(100.0, max(0.0, base_avail - 2.0 * unhealthy + jitter("availability_pct")))
        utilization = min(100.0, max(0.0, 40.0 * load + jitter("utilization_pct")))
        return TelemetrySample(
            slice_id=slice_id,
            tick=tick,
            latency_ms=latency,
            throughput_mbps=throughput,
            availability_pct=availability,
            utilization_pct=utilization,
        )

    # -- inspection -------------------------------------------------------

    def live_handles(self, slice_id: Optional[str] = None) -> list[str]:
        if slice_id is None:
            return sorted(self._units)
        return sorted(h for h, u in self._units.items() if u.slice_id == slice_id)

    def unit_replicas(self, handle: str) -> int:
        return self._require(handle).replicas

    def free_capacity(self) -> dict:
        return {
            c.cluster_id: {"cpu": c.free_cpu(), "memory": c.free_memory()}
            for c in self._clusters.values()
        }

    def capacity_ok(self) -> bool:
        return all(c.free_cpu() >= 0 and c.free_memory() >= 0 for c in self._clusters.values())

    def at_initial_capacity(self) -> bool:
        return all(
            c.free_cpu() == self._initial_capacity[c.cluster_id][0]
            and c.free_memory() == self._initial_capacity[c.cluster_id][1]
            for c in self._clusters.values()
        )

    def set_unit_health(self, slice_id: str, unit_id: str, unhealthy: bool) -> None:
        self._unhealthy[(slice_id, unit_id)] = unhealthy

    def _require(self, handle: str) -> _UnitState:
        unit = self._units.get(handle)
        if unit is None:
            raise UnknownHandle(f"unit {handle!r} is not deployed")
        return unit


class UnavailableBackend:
    """A backend whose ping fails; deploy must leave records untouched."""

    def ping(self) -> bool:
        return False

    def __getattr__(self, name):
        raise AssertionError("unavailable backend must not receive calls")
