import { readFileSync } from "node:fs";

import type { Transport, WireResponse } from "../src/api";

export interface RecordedExchange {
  seq: number;
  worker: string;
  method: "GET" | "POST";
  path: string;
  request_body: unknown | null;
  status: number;
  response_body: unknown;
}

export function loadRecording(): RecordedExchange[] {
  const raw = readFileSync(new URL("./fixtures/recorded.json", import.meta.url), "utf-8");
  return (JSON.parse(raw) as { exchanges: RecordedExchange[] }).exchanges;
}

/**
 * Serves recorded responses in recording order, matching on method+path,
 * and keeps the requests the client actually sent for later assertions.
 */
export class ReplayTransport implements Transport {
  readonly sent: Array<{ method: string; path: string; body: unknown | null }> = [];
  private cursor = 0;

  constructor(private readonly exchanges: RecordedExchange[]) {}

  async request(
    method: "GET" | "POST",
    path: string,
    body: unknown | null,
    _headers: Record<string, string>
  ): Promise<WireResponse> {
    this.sent.push({ method, path, body });
    for (let i = this.cursor; i < this.exchanges.length; i += 1) {
      const exchange = this.exchanges[i]!;
      if (exchange.method === method && exchange.path === path) {
        this.cursor = i + 1;
        return { status: exchange.status, body: exchange.response_body };
      }
    }
    throw new Error(`no recorded exchange left for ${method} ${path}`);
  }
}

/** Always rejects with a domain error, for rollback tests. */
export class RejectingTransport implements Transport {
  async request(): Promise<WireResponse> {
    return { status: 409, body: { detail: "task is not under review by this worker" } };
  }
}
