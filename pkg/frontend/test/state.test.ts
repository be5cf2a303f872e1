import { describe, expect, it } from "vitest";

import {
  applyEvent,
  decisionsWithRejections,
  emptyState,
  foldEvents,
  sliceRows,
} from "../src/state.js";
import { loadFixture } from "./helpers.js";

const canonical = loadFixture("canonical-events.ndjson");
const withRejection = loadFixture("governance-rejection.ndjson");

describe("folding the canonical closed-loop run", () => {
  it("renders the full lifecycle on the slice row", () => {
    const state = foldEvents(canonical);
    const row = state.slices.get("ord-000001");
    expect(row).toBeDefined();
    expect(row!.stateSequence).toEqual([
      "Planned",
      "Deploying",
      "Active",
      "Degraded",
      "Healing",
      "Active",
    ]);
    expect(row!.state).toBe("Active");
    expect(row!.escalated).toBe(false);
  });

  it("tracks the remediated unit at its scaled replica count", () => {
    const state = foldEvents(canonical);
    const row = state.slices.get("ord-000001")!;
    expect(Object.keys(row.units).sort()).toEqual([
      "core_control",
      "core_user_plane",
      "slice_gateway",
      "telemetry_exporter",
    ]);
    expect(row.units["core_user_plane"]!.replicas).toBe(3);
    expect(row.units["core_user_plane"]!.status).toBe("healthy");
  });

  it("collects the violation and the executed action", () => {
    const state = foldEvents(canonical);
    expect(state.violations).toHaveLength(1);
    const violation = state.violations[0]!.violation;
    expect(violation.violation_id).toBe("vio-000001");
    expect(violation.metric).toBe("latency_ms");
    expect(violation.window_range).toEqual([70, 79]);
    expect(violation.consecutive_windows).toBe(3);

    expect(state.actions).toHaveLength(1);
    const action = state.actions[0]!;
    expect(action.kind).toBe("scale_out");
    expect(action.targetUnit).toBe("core_user_plane");
    expect(action.executed).toBe(true);
    expect(action.triggeredBy).toBe("vio-000001");
  });

  it("keeps one governance decision per deployment unit", () => {
    const state = foldEvents(canonical);
    expect(state.decisions.map((d) => d.unitId)).toEqual([
      "core_control",
      "core_user_plane",
      "slice_gateway",
      "telemetry_exporter",
    ]);
    for (const decision of state.decisions) {
      expect(decision.outcome).toBe("selected");
      expect(decision.verdicts.length).toBeGreaterThanOrEqual(2);
    }
  });

  it("advances lastSeq and counts each event once", () => {
    const state = foldEvents(canonical);
    expect(state.eventCount).toBe(canonical.length);
    expect(state.lastSeq).toBe(canonical[canonical.length - 1]!.seq);
  });

  it("ignores duplicate deliveries of the same sequence number", () => {
    const state = emptyState();
    for (const event of canonical) {
      applyEvent(state, event);
      applyEvent(state, event); // duplicate
    }
    expect(state.eventCount).toBe(canonical.length);
    expect(state.violations).toHaveLength(1);
    expect(state.slices.get("ord-000001")!.stateSequence).toEqual([
      "Planned",
      "Deploying",
      "Active",
      "Degraded",
      "Healing",
      "Active",
    ]);
  });

  it("sorts slice rows by id", () => {
    const state = foldEvents(canonical);
    expect(sliceRows(state).map((r) => r.sliceId)).toEqual(["ord-000001"]);
  });
});

describe("folding a run with a rejected candidate", () => {
  it("exposes the rejected candidate and its reason on every decision", () => {
    const state = foldEvents(withRejection);
    const flagged = decisionsWithRejections(state);
    expect(flagged.length).toBeGreaterThan(0);
    for (const decision of flagged) {
      const rejected = decision.verdicts.find((v) => v.failedChecks.length > 0);
      expect(rejected).toBeDefined();
      expect(rejected!.backendId).toBe("planner-x");
      expect(rejected!.verdict).toBe("fail");
      expect(rejected!.failedChecks).toContain("missing-resource-limits");
      // the selection never lands on the failing candidate
      expect(decision.chosenBackendId).not.toBe("planner-x");
      expect(decision.explanation.join("\n")).toContain(
        "planner-x: fail (missing-resource-limits)",
      );
    }
  });

  it("still deploys the slice from the surviving candidates", () => {
    const state = foldEvents(withRejection);
    expect(state.slices.get("ord-000001")!.state).toBe("Active");
  });
});
