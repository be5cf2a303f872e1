// Wire types for the control-plane HTTP API and /events stream.
// The service is the single source of truth; these mirror its JSON shapes.

export type SliceState =
  | "Planned"
  | "Deploying"
  | "Active"
  | "Degraded"
  | "Healing"
  | "RollingBack"
  | "Failed"
  | "Terminated";

export type StreamEvent = {
  seq: number;
  tick: number;
  kind: "slice_transition" | "violation_detected" | "remediation_action" | "governance_decision";
  payload: Record<string, unknown>;
};

export type DeployedUnit = {
  status: string;
  replicas: number;
  handle: string;
  service_class: string;
  manifest: Record<string, unknown>;
};

export type HistoryEntry = {
  from: string;
  event: string;
  to: string;
  cause: string;
  tick: number;
};

export type SliceRecordPayload = {
  slice_id: string;
  state: SliceState;
  escalated: boolean;
  deployed_units: Record<string, DeployedUnit>;
  history: HistoryEntry[];
};

export type TransitionPayload = {
  kind: "slice_transition";
  slice_id: string;
  from: string;
  event: string;
  to: SliceState;
  cause: string;
  tick: number;
  record: SliceRecordPayload;
};

export type Violation = {
  violation_id: string;
  slice_id: string;
  metric: string;
  observed_value: number;
  slo_value: number;
  window_range: [number, number];
  consecutive_windows: number;
};

export type ViolationPayload = {
  kind: "violation_detected";
  slice_state: string;
  violation: Violation;
};

export type RemediationAction = {
  action_id: string;
  slice_id: string;
  kind: string;
  target_unit: string;
  triggered_by: string;
};

export type ActionPayload = {
  kind: "remediation_action";
  executed: boolean;
  action: RemediationAction;
};

export type CandidateVerdict = {
  backend_id: string;
  verdict: "pass" | "fail";
  failed_checks: string[];
};

export type GovernanceDecision = {
  outcome: "selected" | "rejected_all";
  chosen: Record<string, unknown> | null;
  chosen_backend_id: string | null;
  per_candidate_verdicts: CandidateVerdict[];
  explanation: string[];
  audit_ref?: number;
};

export type GovernancePayload = {
  kind: "governance_decision";
  order_id: string;
  unit_id: string;
  decision: GovernanceDecision;
};

export type Offer = {
  offer_id: string;
  provider_id: string;
  region: string;
  service_class: string;
  rate_minor_units_per_hour: number;
  capacity_slots: number;
  currency: string;
};

export type Match = {
  offer: Offer;
  total_cost_minor_units: number;
};

export type Order = {
  order_id: string;
  offer_id: string;
  status: string;
  total_cost_minor_units: number;
  intent: Record<string, unknown>;
};

export type ToolCall = {
  call_id?: string;
  tool: string;
  params: Record<string, unknown>;
};

export type IntentResponse = {
  tool_call: ToolCall;
  result: {
    intent?: Record<string, unknown>;
    matches?: Match[];
    policy_verdict?: { verdict: string; reasons: string[] } | null;
    order?: Order | null;
    slice?: SliceRecordPayload | null;
    offers?: Offer[];
  };
};

export type WindowReport = {
  slice_id: string;
  window_index: number;
  first_tick: number;
  last_tick: number;
  metrics: Record<string, { observed: number; slo: number; compliant: boolean }>;
};

export type AuditRecord = {
  seq: number;
  timestamp: number;
  payload: Record<string, unknown>;
  prev_hash: string;
  hash: string;
};

export type VerifyResult = {
  ok: boolean;
  first_bad_seq: number | null;
  next_seq: number;
};

export type ApiErrorBody = {
  error: string;
  detail: string;
  violations?: Array<Record<string, unknown>>;
};
