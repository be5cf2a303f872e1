// Test scaffolding: fixture loading and a replayed /events endpoint.
//
// The fixture files are real exports from the control plane (one stream
// event per line, exactly the bytes a live subscriber receives), so the
// fold and stream tests exercise the same shapes production sees.

import { readFileSync } from "node:fs";
import { createServer, type Server } from "node:http";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { StreamEvent } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixture(name: string): StreamEvent[] {
  const raw = readFileSync(join(here, "fixtures", name), "utf-8");
  return raw
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as StreamEvent);
}

export type ReplayServerOptions = {
  // destroy the socket abruptly after this many events, first connection only
  dropAfterCount?: number;
  // second connection ignores ?after and replays from the start (overlap)
  ignoreAfterOnce?: boolean;
  // write the response in fixed-size chunks to exercise line reassembly
  chunkSize?: number;
};

export type ReplayServer = {
  url: string;
  connections: () => number;
  close: () => Promise<void>;
};

export function startReplayServer(
  events: StreamEvent[],
  options: ReplayServerOptions = {},
): Promise<ReplayServer> {
  let connectionCount = 0;
  const server: Server = createServer((req, res) => {
    const url = new URL(req.url ?? "/", "http://localhost");
    if (url.pathname !== "/events") {
      res.writeHead(404, { "content-type": "application/json" });
      res.end(JSON.stringify({ error: "unknown_route", detail: url.pathname }));
      return;
    }
    connectionCount += 1;
    const isFirst = connectionCount === 1;
    const isSecond = connectionCount === 2;
    let after = Number(url.searchParams.get("after") ?? "-1");
    if (isSecond && options.ignoreAfterOnce) {
      after = -1;
    }
    res.writeHead(200, { "content-type": "application/x-ndjson" });

    let body = "";
    let sent = 0;
    let dropped = false;
    for (const event of events) {
      if (event.seq <= after) {
        continue;
      }
      if (isFirst && options.dropAfterCount !== undefined && sent >= options.dropAfterCount) {
        dropped = true;
        break;
      }
      body += JSON.stringify(event) + "\n";
      if (sent % 3 === 2) {
        body += "\n"; // heartbeat
      }
      sent += 1;
    }
    const size = options.chunkSize ?? Math.max(body.length, 1);
    for (let i = 0; i < body.length; i += size) {
      res.write(body.slice(i, i + size));
    }
    if (dropped) {
      res.destroy(); // mid-scenario connection loss, no clean end
    } else {
      res.end();
    }
  });
  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      const port = typeof address === "object" && address ? address.port : 0;
      resolve({
        url: `http://127.0.0.1:${port}`,
        connections: () => connectionCount,
        close: () =>
          new Promise<void>((done) => {
            server.closeAllConnections();
            server.close(() => done());
          }),
      });
    });
  });
}
