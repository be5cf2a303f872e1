// NDJSON event-stream consumer.
//
// The service replays history from `after` and then stays live, padding
// idle stretches with blank heartbeat lines.  This client keeps the last
// seen sequence number and reconnects with `?after=lastSeq`, so a drop
// mid-scenario never loses an event; replayed overlap is deduplicated by
// sequence number.

import type { StreamEvent } from "./types.js";

export type StreamStatus = "connecting" | "live" | "reconnecting" | "stopped";

export type StreamHandle = {
  stop: () => void;
  lastSeq: () => number;
};

export type StreamOptions = {
  baseUrl: string;
  onEvent: (event: StreamEvent) => void;
  onStatus?: (status: StreamStatus, lastSeq: number) => void;
  // resume point: only events with seq > after are delivered
  after?: number;
  retryDelayMs?: number;
  fetchFn?: typeof fetch;
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function openEventStream(options: StreamOptions): StreamHandle {
  const fetchFn = options.fetchFn ?? fetch;
  const retryDelayMs = options.retryDelayMs ?? 1000;
  let lastSeq = options.after ?? -1;
  let stopped = false;
  let controller: AbortController | null = null;

  const notify = (status: StreamStatus) => {
    options.onStatus?.(status, lastSeq);
  };

  const consume = async (body: ReadableStream<Uint8Array>) => {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      let newline: number;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (!line) {
          continue; // heartbeat
        }
        let event: StreamEvent;
        try {
          event = JSON.parse(line) as StreamEvent;
        } catch {
          continue; // torn line on a dying connection
        }
        if (typeof event.seq !== "number" || event.seq <= lastSeq) {
          continue; // replayed overlap after a reconnect
        }
        lastSeq = event.seq;
        options.onEvent(event);
        if (stopped) {
          return;
        }
      }
    }
  };

  const run = async () => {
    let first = true;
    while (!stopped) {
      notify(first ? "connecting" : "reconnecting");
      first = false;
      try {
        controller = new AbortController();
        const res = await fetchFn(`${options.baseUrl}/events?after=${lastSeq}`, {
          signal: controller.signal,
          headers: { accept: "application/x-ndjson" },
        });
        if (!res.ok || !res.body) {
          throw new Error(`event stream request failed: ${res.status}`);
        }
        notify("live");
        await consume(res.body);
      } catch {
        // fall through to retry
      }
      if (!stopped) {
        await sleep(retryDelayMs);
      }
    }
    notify("stopped");
  };

  void run();

  return {
    stop() {
      stopped = true;
      controller?.abort();
    },
    lastSeq: () => lastSeq,
  };
}
