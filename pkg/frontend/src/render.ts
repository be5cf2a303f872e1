// HTML string builders.  Pure functions of the view model, so the pages
// can be asserted on without a browser.

import type { ConsoleState, GovernanceEntry, SliceRow } from "./state.js";
import { sliceRows } from "./state.js";
import type {
  ApiErrorBody,
  AuditRecord,
  Match,
  ToolCall,
  VerifyResult,
  WindowReport,
} from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const STATE_CLASS: Record<string, string> = {
  Active: "state-good",
  Healing: "state-warn",
  Degraded: "state-bad",
  Deploying: "state-warn",
  RollingBack: "state-bad",
  Failed: "state-bad",
  Terminated: "state-muted",
  Planned: "state-muted",
};

function stateChip(state: string): string {
  const cls = STATE_CLASS[state] ?? "state-muted";
  return `<span class="chip ${cls}">${escapeHtml(state)}</span>`;
}

export function renderStateSequence(row: SliceRow): string {
  return row.stateSequence.map((s) => escapeHtml(s)).join(" &rarr; ");
}

export function renderSliceTable(state: ConsoleState): string {
  const rows = sliceRows(state);
  if (rows.length === 0) {
    return `<p class="empty">no slices yet</p>`;
  }
  const body = rows
    .map(
      (row) => `
  <tr class="slice-row" data-slice-id="${escapeHtml(row.sliceId)}">
    <td class="mono">${escapeHtml(row.sliceId)}</td>
    <td>${stateChip(row.state)}${row.escalated ? ` <span class="chip state-bad">escalated</span>` : ""}</td>
    <td class="mono">${row.sinceTick}</td>
    <td>${Object.keys(row.units).length}</td>
    <td class="sequence">${renderStateSequence(row)}</td>
  </tr>`,
    )
    .join("");
  return `<table class="grid">
  <thead><tr><th>slice</th><th>state</th><th>since tick</th><th>units</th><th>lifecycle so far</th></tr></thead>
  <tbody>${body}</tbody>
</table>`;
}

export function renderSliceDetail(row: SliceRow, reports: WindowReport[]): string {
  const units = Object.entries(row.units)
    .map(
      ([unitId, unit]) => `
  <tr>
    <td class="mono">${escapeHtml(unitId)}</td>
    <td>${escapeHtml(unit.status)}</td>
    <td>${unit.replicas}</td>
    <td class="mono">${escapeHtml(unit.handle)}</td>
  </tr>`,
    )
    .join("");
  const windows = reports
    .map((report) => {
      const metrics = Object.entries(report.metrics)
        .map(
          ([metric, m]) =>
            `<span class="chip ${m.compliant ? "state-good" : "state-bad"}">` +
            `${escapeHtml(metric)} ${m.observed.toFixed(3)} / slo ${m.slo}</span>`,
        )
        .join(" ");
      return `<tr>
    <td class="mono">${report.window_index}</td>
    <td class="mono">${report.first_tick}-${report.last_tick}</td>
    <td>${metrics}</td>
  </tr>`;
    })
    .join("");
  return `<h3 class="mono">${escapeHtml(row.sliceId)} ${stateChip(row.state)}</h3>
<h4>units</h4>
<table class="grid">
  <thead><tr><th>unit</th><th>status</th><th>replicas</th><th>handle</th></tr></thead>
  <tbody>${units}</tbody>
</table>
<h4>windows</h4>
<table class="grid">
  <thead><tr><th>window</th><th>ticks</th><th>compliance</th></tr></thead>
  <tbody>${windows || `<tr><td colspan="3" class="empty">no closed windows yet</td></tr>`}</tbody>
</table>`;
}

export function renderViolationFeed(state: ConsoleState): string {
  if (state.violations.length === 0 && state.actions.length === 0) {
    return `<p class="empty">no violations</p>`;
  }
  const violations = state.violations
    .map(
      (entry) => `
  <li class="violation">
    <span class="chip state-bad">${escapeHtml(entry.violation.violation_id)}</span>
    tick ${entry.tick}: ${escapeHtml(entry.violation.metric)} observed
    ${entry.violation.observed_value.toFixed(3)} vs slo ${entry.violation.slo_value}
    (windows ${entry.violation.window_range[0]}-${entry.violation.window_range[1]},
    ${entry.violation.consecutive_windows} consecutive)
  </li>`,
    )
    .join("");
  const actions = state.actions
    .map(
      (entry) => `
  <li class="action">
    <span class="chip ${entry.executed ? "state-good" : "state-warn"}">${escapeHtml(entry.actionId)}</span>
    tick ${entry.tick}: ${escapeHtml(entry.kind)} ${escapeHtml(entry.targetUnit)}
    [${entry.executed ? "executed" : "suppressed"}] for ${escapeHtml(entry.triggeredBy)}
  </li>`,
    )
    .join("");
  return `<h4>violations</h4><ul class="feed">${violations || "<li class='empty'>none</li>"}</ul>
<h4>remediation actions</h4><ul class="feed">${actions || "<li class='empty'>none</li>"}</ul>`;
}

export function renderGovernance(decisions: GovernanceEntry[]): string {
  if (decisions.length === 0) {
    return `<p class="empty">no governance decisions yet</p>`;
  }
  return decisions
    .map((decision) => {
      const verdicts = decision.verdicts
        .map(
          (v) => `
    <tr>
      <td class="mono">${escapeHtml(v.backendId)}</td>
      <td>${v.verdict === "pass" ? `<span class="chip state-good">pass</span>` : `<span class="chip state-bad">fail</span>`}</td>
      <td class="mono">${escapeHtml(v.failedChecks.join(", "))}</td>
    </tr>`,
        )
        .join("");
      const explanation = decision.explanation
        .map((line) => `<li>${escapeHtml(line)}</li>`)
        .join("");
      return `<section class="decision">
  <h3>${escapeHtml(decision.unitId)} <span class="muted">(${escapeHtml(decision.orderId)})</span>
    ${decision.outcome === "selected" ? `<span class="chip state-good">selected ${escapeHtml(decision.chosenBackendId ?? "")}</span>` : `<span class="chip state-bad">rejected_all</span>`}
  </h3>
  <table class="grid">
    <thead><tr><th>backend</th><th>verdict</th><th>failed checks</th></tr></thead>
    <tbody>${verdicts}</tbody>
  </table>
  <ul class="explanation">${explanation}</ul>
</section>`;
    })
    .join("\n");
}

export function renderVerifyBadge(result: VerifyResult): string {
  if (result.ok) {
    return `<span class="chip state-good">chain ok (${result.next_seq} records)</span>`;
  }
  return `<span class="chip state-bad">chain BROKEN at seq ${result.first_bad_seq}</span>`;
}

export function renderAuditRecords(records: AuditRecord[]): string {
  const rows = records
    .map(
      (record) => `
  <tr>
    <td class="mono">${record.seq}</td>
    <td class="mono">${record.timestamp}</td>
    <td class="mono">${escapeHtml(String((record.payload as { kind?: string }).kind ?? ""))}</td>
    <td class="mono hash">${escapeHtml(record.hash.slice(0, 16))}&hellip;</td>
  </tr>`,
    )
    .join("");
  return `<table class="grid">
  <thead><tr><th>seq</th><th>tick</th><th>kind</th><th>hash</th></tr></thead>
  <tbody>${rows || `<tr><td colspan="4" class="empty">no records</td></tr>`}</tbody>
</table>`;
}

export function renderToolCall(call: ToolCall): string {
  return `<div class="toolcall">
  <span class="chip state-muted">${escapeHtml(call.tool)}</span>
  <pre class="mono">${escapeHtml(JSON.stringify(call.params, null, 2))}</pre>
</div>`;
}

export function renderMatches(matches: Match[]): string {
  if (matches.length === 0) {
    return `<p class="empty">no offers matched</p>`;
  }
  const rows = matches
    .map(
      (match) => `
  <tr>
    <td class="mono">${escapeHtml(match.offer.offer_id)}</td>
    <td>${escapeHtml(match.offer.provider_id)}</td>
    <td>${escapeHtml(match.offer.region)}</td>
    <td class="mono">${match.total_cost_minor_units}</td>
  </tr>`,
    )
    .join("");
  return `<table class="grid">
  <thead><tr><th>offer</th><th>provider</th><th>region</th><th>total cost</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

export function renderError(body: ApiErrorBody): string {
  const violations = (body.violations ?? [])
    .map((violation) => `<li class="mono">${escapeHtml(JSON.stringify(violation))}</li>`)
    .join("");
  return `<div class="errorbox">
  <strong>${escapeHtml(body.error)}</strong>: ${escapeHtml(body.detail)}
  ${violations ? `<ul>${violations}</ul>` : ""}
</div>`;
}

export function renderStreamStatus(status: string, lastSeq: number): string {
  const cls = status === "live" ? "state-good" : status === "stopped" ? "state-muted" : "state-warn";
  return `<span class="chip ${cls}">stream: ${escapeHtml(status)}</span> <span class="muted mono">last seq ${lastSeq}</span>`;
}
