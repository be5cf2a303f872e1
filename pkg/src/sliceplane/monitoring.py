"""Windowed SLA evaluation, violation detection, and remediation signals.

Telemetry is grouped into fixed windows of W ticks.  Latency compliance
uses the nearest-rank p95 over the window (value at rank ceil(0.95*n) of
the sorted samples); availability and throughput use the window mean.
A metric must be non-compliant for H consecutive windows before a
violation is emitted (hysteresis), any compliant window resets the
count, and after an action fires the slice is quiet for C ticks
(cooldown).  Defaults: W=10, H=3, C=60.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import SlicePlaneError
from .ids import IdFactory
from .intents import SliceIntent
from .simulator import TelemetrySample

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_TICKS = 10
DEFAULT_HYSTERESIS = 3
DEFAULT_COOLDOWN_TICKS = 60

# metric -> (remediation kind, unit the action targets)
ACTION_FOR_METRIC = {
    "latency_ms": ("scale_out", "core_user_plane"),
    "throughput_mbps": ("scale_out", "core_user_plane"),
    "availability_pct": ("redeploy_unit", "core_user_plane"),
}


class EmptyWindow(SlicePlaneError):
    code = "empty_window"


def nearest_rank_p95(values: list[float]) -> float:
    """Value at rank ceil(0.95 * n) of the sorted window (1-indexed)."""
    if not values:
        raise EmptyWindow("cannot take a percentile of zero samples")
    ordered = sorted(values)
    rank = math.ceil(0.95 * len(ordered))
    return ordered[rank - 1]


@dataclass(frozen=True)
class WindowReport:
    slice_id: str
    window_index: int
    first_tick: int
    last_tick: int
    # metric -> {"observed", "slo", "compliant"}
    metrics: dict

    def compliant(self) -> bool:
        return all(m["compliant"] for m in self.metrics.values())

    def failing_metrics(self) -> list[str]:
        return [name for name, m in self.metrics.items() if not m["compliant"]]

    def to_payload(self) -> dict:
        return {
            "slice_id": self.slice_id,
            "window_index": self.window_index,
            "first_tick": self.first_tick,
            "last_tick": self.last_tick,
            "metrics": self.metrics,
        }


@dataclass(frozen=True)
class SlaViolation:
    violation_id: str
    slice_id: str
    metric: str
    observed_value: float
    slo_value: float
    window_range: tuple
    consecutive_windows: int

    def to_payload(self) -> dict:
        return {
            "violation_id": self.violation_id,
            "slice_id": self.slice_id,
            "metric": self.metric,
            "observed_value": self.observed_value,
            "slo_value": self.slo_value,
            "window_range": list(self.window_range),
            "consecutive_windows": self.consecutive_windows,
        }


@dataclass(frozen=True)
class RemediationAction:
    action_id: str
    slice_id: str
    kind: str
    target_unit: str
    triggered_by: str

    def to_payload(self) -> dict:
        return {
            "action_id": self.action_id,
            "slice_id": self.slice_id,
            "kind": self.kind,
            "target_unit": self.target_unit,
            "triggered_by": self.triggered_by,
        }


def evaluate_window(intent: SliceIntent, samples: list[TelemetrySample]) -> WindowReport:
    """Compliance per declared SLO metric; absent SLOs are vacuous."""
    if not samples:
        raise EmptyWindow("window contains no samples")
    ticks = [s.tick for s in samples]
    slice_id = samples[0].slice_id
    window_index = min(ticks) // DEFAULT_WINDOW_TICKS
    metrics: dict = {}
    if intent.latency_slo_ms is not None:
        observed = nearest_rank_p95([s.latency_ms for s in samples])
        metrics["latency_ms"] = {
            "observed": observed,
            "slo": intent.latency_slo_ms,
            "compliant": observed <= intent.latency_slo_ms,
        }
    if intent.availability_slo_pct is not None:
        observed = sum(s.availability_pct for s in samples) / len(samples)
        metrics["availability_pct"] = {
            "observed": observed,
            "slo": intent.availability_slo_pct,
            "compliant": observed >= intent.availability_slo_pct,
        }
    if intent.throughput_slo_mbps is not None:
        observed = sum(s.throughput_mbps for s in samples) / len(samples)
        metrics["throughput_mbps"] = {
            "observed": observed,
            "slo": intent.throughput_slo_mbps,
            "compliant": observed >= intent.throughput_slo_mbps,
        }
    return WindowReport(
        slice_id=slice_id,
        window_index=window_index,
        first_tick=min(ticks),
        last_tick=max(ticks),
        metrics=metrics,
    )


@dataclass
class _SliceMonitorState:
    # metric -> consecutive non-compliant window count
    streaks: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    last_action_tick: Optional[int] = None
    reports: list = field(default_factory=list)


class SlaMonitor:
    """Per-slice windowing, hysteresis, and cooldown over a sample stream.

    ``ingest`` buffers samples; every full window is evaluated in tick
    order.  Violations and actions come back to the caller, which owns
    delivery to the orchestrator.
    """

    def __init__(
        self,
        window_ticks: int = DEFAULT_WINDOW_TICKS,
        hysteresis: int = DEFAULT_HYSTERESIS,
        cooldown_ticks: int = DEFAULT_COOLDOWN_TICKS,
    ):
        if window_ticks < 1 or hysteresis < 1 or cooldown_ticks < 0:
            raise ValueError("window and hysteresis must be >= 1, cooldown >= 0")
        self.window_ticks = window_ticks
        self.hysteresis = hysteresis
        self.cooldown_ticks = cooldown_ticks
        self._intents: dict[str, SliceIntent] = {}
        self._state: dict[str, _SliceMonitorState] = {}
        self._violation_ids = IdFactory("vio", width=6)
        self._action_ids = IdFactory("act", width=6)

    def watch(self, slice_id: str, intent: SliceIntent) -> None:
        self._intents[slice_id] = intent
        self._state.setdefault(slice_id, _SliceMonitorState())

    def unwatch(self, slice_id: str) -> None:
        self._intents.pop(slice_id, None)
        self._state.pop(slice_id, None)

    def watched(self) -> list[str]:
        return sorted(self._intents)

    def ingest(
        self, sample: TelemetrySample
    ) -> tuple[Optional[WindowReport], Optional[SlaViolation], Optional[RemediationAction]]:
        """Feed one sample; returns (report, violation, action) when a
        window closes, else (None, None, None).

        The window covering ticks [k*W, (k+1)*W) closes when its last
        tick arrives.
        """
        intent = self._intents.get(sample.slice_id)
        if intent is None:
            return None, None, None
        state = self._state[sample.slice_id]
        state.samples.append(sample)
        if sample.tick % self.window_ticks != self.window_ticks - 1:
            return None, None, None
        window_start = sample.tick - self.window_ticks + 1
        in_window = [s for s in state.samples if s.tick >= window_start]
        state.samples = []
        report = self._evaluate(intent, in_window)
        state.reports.append(report)
        violation = self._detect(state, report)
        action = None
        if violation is not None:
            action = self._act(state, report, violation)
        return report, violation, action

    def _evaluate(self, intent: SliceIntent, samples: list) -> WindowReport:
        report = evaluate_window(intent, samples)
        # recompute index against the configured width
        return WindowReport(
            slice_id=report.slice_id,
            window_index=report.first_tick // self.window_ticks,
            first_tick=report.first_tick,
            last_tick=report.last_tick,
            metrics=report.metrics,
        )

    def _detect(self, state: _SliceMonitorState, report: WindowReport) -> Optional[SlaViolation]:
        """Hysteresis: emit exactly when a streak reaches H.

        Longer streaks keep counting without re-emitting; only a
        compliant window arms the metric again.  When several metrics
        reach H in the same window, the first in evaluation order wins.
        """
        violation = None
        for metric, data in report.metrics.items():
            if data["compliant"]:
                state.streaks[metric] = 0
                continue
            streak = state.streaks.get(metric, 0) + 1
            state.streaks[metric] = streak
            if streak == self.hysteresis and violation is None:
                violation = SlaViolation(
                    violation_id=self._violation_ids.next(),
                    slice_id=report.slice_id,
                    metric=metric,
                    observed_value=data["observed"],
                    slo_value=data["slo"],
                    window_range=(report.first_tick, report.last_tick),
                    consecutive_windows=streak,
                )
        return violation

    def _act(
        self, state: _SliceMonitorState, report: WindowReport, violation: SlaViolation
    ) -> Optional[RemediationAction]:
        if (
            state.last_action_tick is not None
            and report.last_tick - state.last_action_tick < self.cooldown_ticks
        ):
            logger.info(
                "cooldown suppressed action for %s (last at tick %s)",
                violation.slice_id, state.last_action_tick,
            )
            return None
        kind, target = ACTION_FOR_METRIC[violation.metric]
        state.last_action_tick = report.last_tick
        return RemediationAction(
            action_id=self._action_ids.next(),
            slice_id=violation.slice_id,
            kind=kind,
            target_unit=target,
            triggered_by=violation.violation_id,
        )

    def reports_for(self, slice_id: str) -> list[WindowReport]:
        state = self._state.get(slice_id)
        return list(state.reports) if state else []
