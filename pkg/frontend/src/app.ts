// Browser wiring: tabs, forms, and the live event stream.

import { ApiClient, ApiError } from "./api.js";
import {
  renderAuditRecords,
  renderError,
  renderGovernance,
  renderMatches,
  renderSliceDetail,
  renderSliceTable,
  renderStreamStatus,
  renderToolCall,
  renderVerifyBadge,
  renderViolationFeed,
} from "./render.js";
import { applyEvent, emptyState } from "./state.js";
import { openEventStream, type StreamHandle } from "./stream.js";
import type { IntentResponse } from "./types.js";

const $ = <T extends HTMLElement>(selector: string): T => {
  const el = document.querySelector<T>(selector);
  if (!el) {
    throw new Error(`missing element ${selector}`);
  }
  return el;
};

function defaultBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8470";
}

const state = emptyState();
let baseUrl = defaultBaseUrl();
let api = new ApiClient(baseUrl);
let stream: StreamHandle | null = null;
let auditAfter = -1;

function refreshSlices(): void {
  $("#slice-table").innerHTML = renderSliceTable(state);
  $("#violation-feed").innerHTML = renderViolationFeed(state);
  for (const row of document.querySelectorAll<HTMLTableRowElement>(".slice-row")) {
    row.addEventListener("click", () => {
      void showSliceDetail(row.dataset.sliceId ?? "");
    });
  }
}

function refreshGovernance(): void {
  $("#governance-list").innerHTML = renderGovernance(state.decisions);
}

async function showSliceDetail(sliceId: string): Promise<void> {
  const row = state.slices.get(sliceId);
  if (!row) {
    return;
  }
  try {
    const { reports } = await api.compliance(sliceId);
    $("#slice-detail").innerHTML = renderSliceDetail(row, reports);
  } catch (err) {
    $("#slice-detail").innerHTML = renderApiError(err);
  }
}

function renderApiError(err: unknown): string {
  if (err instanceof ApiError) {
    return renderError(err.body);
  }
  return renderError({ error: "unreachable", detail: String(err) });
}

function connectStream(): void {
  stream?.stop();
  stream = openEventStream({
    baseUrl,
    after: state.lastSeq,
    onEvent: (event) => {
      applyEvent(state, event);
      refreshSlices();
      refreshGovernance();
    },
    onStatus: (status, lastSeq) => {
      $("#stream-status").innerHTML = renderStreamStatus(status, lastSeq);
    },
  });
}

function showIntentResult(doc: IntentResponse): void {
  const parts: string[] = [renderToolCall(doc.tool_call)];
  const result = doc.result;
  if (result.matches) {
    parts.push(renderMatches(result.matches));
  }
  if (result.policy_verdict) {
    const v = result.policy_verdict;
    parts.push(
      `<p>policy: <span class="chip ${v.verdict === "allow" ? "state-good" : "state-bad"}">${v.verdict}</span> ${v.reasons.join(", ")}</p>`,
    );
  }
  if (result.order) {
    const order = result.order;
    const approval =
      order.status === "pending_approval"
        ? ` <button id="approve-order" data-order-id="${order.order_id}">approve</button>` +
          ` <button id="reject-order" data-order-id="${order.order_id}">reject</button>`
        : "";
    parts.push(`<p>order <span class="mono">${order.order_id}</span> status=${order.status}${approval}</p>`);
  }
  if (result.slice) {
    parts.push(`<p>slice <span class="mono">${result.slice.slice_id}</span> state=${result.slice.state}</p>`);
  }
  if (result.offers) {
    parts.push(`<pre class="mono">${JSON.stringify(result.offers, null, 2)}</pre>`);
  }
  $("#intent-result").innerHTML = parts.join("\n");
  const approve = document.querySelector<HTMLButtonElement>("#approve-order");
  approve?.addEventListener("click", async () => {
    try {
      const res = await api.approveOrder(approve.dataset.orderId ?? "");
      $("#intent-result").innerHTML += `<p>approved; slice state=${res.slice?.state ?? "?"}</p>`;
    } catch (err) {
      $("#intent-result").innerHTML += renderApiError(err);
    }
  });
  const reject = document.querySelector<HTMLButtonElement>("#reject-order");
  reject?.addEventListener("click", async () => {
    try {
      await api.rejectOrder(reject.dataset.orderId ?? "");
      $("#intent-result").innerHTML += `<p>rejected</p>`;
    } catch (err) {
      $("#intent-result").innerHTML += renderApiError(err);
    }
  });
}

async function loadAuditPage(reset: boolean): Promise<void> {
  if (reset) {
    auditAfter = -1;
  }
  try {
    const { records } = await api.auditRecords(auditAfter, 50);
    if (records.length > 0) {
      auditAfter = records[records.length - 1]!.seq;
    }
    $("#audit-records").innerHTML = renderAuditRecords(records);
  } catch (err) {
    $("#audit-records").innerHTML = renderApiError(err);
  }
}

function wireTabs(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>(".tab-button")) {
    button.addEventListener("click", () => {
      for (const other of document.querySelectorAll(".tab-button")) {
        other.classList.toggle("current", other === button);
      }
      for (const page of document.querySelectorAll<HTMLElement>(".page")) {
        page.hidden = page.id !== `page-${button.dataset.page}`;
      }
    });
  }
}

function main(): void {
  ($("#api-addr") as HTMLInputElement).value = defaultBaseUrl();
  wireTabs();
  connectStream();

  $("#api-connect").addEventListener("click", () => {
    baseUrl = ($("#api-addr") as HTMLInputElement).value;
    api = new ApiClient(baseUrl);
    connectStream();
  });

  $("#intent-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = ($("#intent-text") as HTMLTextAreaElement).value.trim();
    const tenant = ($("#intent-tenant") as HTMLInputElement).value.trim() || "default";
    if (!text) {
      return;
    }
    api
      .submitText(text, tenant)
      .then(showIntentResult)
      .catch((err) => {
        $("#intent-result").innerHTML = renderApiError(err);
      });
  });

  $("#audit-verify").addEventListener("click", async () => {
    try {
      $("#verify-badge").innerHTML = renderVerifyBadge(await api.auditVerify());
    } catch (err) {
      $("#verify-badge").innerHTML = renderApiError(err);
    }
  });
  $("#audit-reload").addEventListener("click", () => void loadAuditPage(true));
  $("#audit-more").addEventListener("click", () => void loadAuditPage(false));
  void loadAuditPage(true);
}

main();
