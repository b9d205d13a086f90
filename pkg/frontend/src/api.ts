/** Thin client for the agent's loopback API. The fetch function is
 * injectable so tests can fake the backend. */

import type { GridSnapshot } from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class AgentClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let message = `${response.status}`;
      try {
        const payload = await response.json();
        if (payload && payload.error) {
          message = String(payload.error);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(message, response.status);
    }
    return (await response.json()) as T;
  }

  getGrid(): Promise<GridSnapshot> {
    return this.request<GridSnapshot>("GET", "/local/grid");
  }

  editCell(addr: string, text: string): Promise<{ changed: string[]; revision: number }> {
    return this.request("POST", "/local/cells", { addr, text });
  }

  registerExport(body: {
    space: string;
    name: string;
    description: string;
    range: string;
    space_wide: boolean;
    allowed: string[];
  }): Promise<{ id: string; range: string }> {
    return this.request("POST", "/local/exports", body);
  }

  registerImport(exportId: string, target: string): Promise<{ id: string; target: string }> {
    return this.request("POST", "/local/imports", { export_id: exportId, target });
  }

  tick(): Promise<unknown> {
    return this.request("POST", "/local/ticks", {});
  }
}
