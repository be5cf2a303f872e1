// Thin REST client. Every mutation is an independent request; the
// console never invents state from a response it did not receive.

import type {
  ApiErrorBody,
  AuditRecord,
  IntentResponse,
  Offer,
  Order,
  SliceRecordPayload,
  ToolCall,
  VerifyResult,
  WindowReport,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(`${body.error}: ${body.detail}`);
    this.status = status;
    this.body = body;
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
  ): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: {
        ...(body !== undefined ? { "content-type": "application/json" } : {}),
        ...headers,
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await res.text();
    const doc = text ? JSON.parse(text) : {};
    if (!res.ok) {
      throw new ApiError(res.status, doc as ApiErrorBody);
    }
    return doc as T;
  }

  submitText(text: string, tenant = "default"): Promise<IntentResponse> {
    return this.request("POST", "/intents", { text }, { "X-Tenant-Id": tenant });
  }

  submitToolCall(call: ToolCall, tenant = "default"): Promise<IntentResponse> {
    return this.request("POST", "/intents", { tool_call: call }, { "X-Tenant-Id": tenant });
  }

  offers(): Promise<{ offers: Offer[] }> {
    return this.request("GET", "/offers");
  }

  orders(): Promise<{ orders: Order[] }> {
    return this.request("GET", "/orders");
  }

  approveOrder(orderId: string): Promise<{ order: Order; slice: SliceRecordPayload | null }> {
    return this.request("POST", `/orders/${orderId}/approve`);
  }

  rejectOrder(orderId: string): Promise<{ order: Order }> {
    return this.request("POST", `/orders/${orderId}/reject`);
  }

  slices(): Promise<{ slices: SliceRecordPayload[] }> {
    return this.request("GET", "/slices");
  }

  slice(sliceId: string): Promise<{ slice: SliceRecordPayload }> {
    return this.request("GET", `/slices/${sliceId}`);
  }

  compliance(sliceId: string): Promise<{ reports: WindowReport[] }> {
    return this.request("GET", `/slices/${sliceId}/compliance`);
  }

  terminate(sliceId: string): Promise<{ slice: SliceRecordPayload; order: Order | null }> {
    return this.request("POST", `/slices/${sliceId}/terminate`);
  }

  auditRecords(after = -1, limit = 50): Promise<{ records: AuditRecord[] }> {
    return this.request("GET", `/audit/records?after=${after}&limit=${limit}`);
  }

  auditVerify(): Promise<VerifyResult> {
    return this.request("GET", "/audit/verify");
  }

  healthz(): Promise<{ status: string; clock: number; version: string }> {
    return this.request("GET", "/healthz");
  }
}
