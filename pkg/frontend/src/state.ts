// Console view model, folded purely from received stream events.
//
// Invariant: every displayed state change originates from an event the
// console actually received.  Nothing here speculates about what the
// service might do next, so the fold of a replayed event file is exactly
// the view a live session would have shown.

import type {
  ActionPayload,
  DeployedUnit,
  GovernancePayload,
  StreamEvent,
  TransitionPayload,
  Violation,
  ViolationPayload,
} from "./types.js";

export type SliceRow = {
  sliceId: string;
  state: string;
  sinceTick: number;
  escalated: boolean;
  lastEvent: string;
  lastCause: string;
  // every state this console has seen for the slice, in arrival order
  stateSequence: string[];
  units: Record<string, DeployedUnit>;
};

export type ViolationEntry = {
  seq: number;
  tick: number;
  violation: Violation;
};

export type ActionEntry = {
  seq: number;
  tick: number;
  executed: boolean;
  actionId: string;
  sliceId: string;
  kind: string;
  targetUnit: string;
  triggeredBy: string;
};

export type GovernanceEntry = {
  seq: number;
  tick: number;
  orderId: string;
  unitId: string;
  outcome: string;
  chosenBackendId: string | null;
  verdicts: Array<{ backendId: string; verdict: string; failedChecks: string[] }>;
  explanation: string[];
};

export type ConsoleState = {
  lastSeq: number;
  eventCount: number;
  slices: Map<string, SliceRow>;
  violations: ViolationEntry[];
  actions: ActionEntry[];
  decisions: GovernanceEntry[];
};

export function emptyState(): ConsoleState {
  return {
    lastSeq: -1,
    eventCount: 0,
    slices: new Map(),
    violations: [],
    actions: [],
    decisions: [],
  };
}

function applyTransition(state: ConsoleState, event: StreamEvent): void {
  const payload = event.payload as unknown as TransitionPayload;
  let row = state.slices.get(payload.slice_id);
  if (!row) {
    row = {
      sliceId: payload.slice_id,
      state: payload.from,
      sinceTick: payload.tick,
      escalated: false,
      lastEvent: "",
      lastCause: "",
      stateSequence: [payload.from],
      units: {},
    };
    state.slices.set(payload.slice_id, row);
  }
  row.state = payload.to;
  row.sinceTick = payload.tick;
  row.lastEvent = payload.event;
  row.lastCause = payload.cause;
  row.stateSequence.push(payload.to);
  row.escalated = payload.record.escalated;
  row.units = payload.record.deployed_units;
}

function applyViolation(state: ConsoleState, event: StreamEvent): void {
  const payload = event.payload as unknown as ViolationPayload;
  state.violations.push({
    seq: event.seq,
    tick: event.tick,
    violation: payload.violation,
  });
}

function applyAction(state: ConsoleState, event: StreamEvent): void {
  const payload = event.payload as unknown as ActionPayload;
  state.actions.push({
    seq: event.seq,
    tick: event.tick,
    executed: payload.executed,
    actionId: payload.action.action_id,
    sliceId: payload.action.slice_id,
    kind: payload.action.kind,
    targetUnit: payload.action.target_unit,
    triggeredBy: payload.action.triggered_by,
  });
}

function applyGovernance(state: ConsoleState, event: StreamEvent): void {
  const payload = event.payload as unknown as GovernancePayload;
  state.decisions.push({
    seq: event.seq,
    tick: event.tick,
    orderId: payload.order_id,
    unitId: payload.unit_id,
    outcome: payload.decision.outcome,
    chosenBackendId: payload.decision.chosen_backend_id,
    verdicts: payload.decision.per_candidate_verdicts.map((v) => ({
      backendId: v.backend_id,
      verdict: v.verdict,
      failedChecks: v.failed_checks,
    })),
    explanation: payload.decision.explanation,
  });
}

export function applyEvent(state: ConsoleState, event: StreamEvent): ConsoleState {
  if (event.seq <= state.lastSeq) {
    return state; // duplicate delivery; the fold is idempotent per seq
  }
  state.lastSeq = event.seq;
  state.eventCount += 1;
  switch (event.kind) {
    case "slice_transition":
      applyTransition(state, event);
      break;
    case "violation_detected":
      applyViolation(state, event);
      break;
    case "remediation_action":
      applyAction(state, event);
      break;
    case "governance_decision":
      applyGovernance(state, event);
      break;
  }
  return state;
}

export function foldEvents(events: Iterable<StreamEvent>): ConsoleState {
  const state = emptyState();
  for (const event of events) {
    applyEvent(state, event);
  }
  return state;
}

export function sliceRows(state: ConsoleState): SliceRow[] {
  return [...state.slices.values()].sort((a, b) => a.sliceId.localeCompare(b.sliceId));
}

// decisions that rejected at least one candidate, for the governance page filter
export function decisionsWithRejections(state: ConsoleState): GovernanceEntry[] {
  return state.decisions.filter((d) => d.verdicts.some((v) => v.failedChecks.length > 0));
}
