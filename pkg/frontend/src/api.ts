// Typed client for the engine's /v1 HTTP API. No request state is kept
// here; every method returns the server's JSON (or throws ApiFailure).

export interface SessionResource {
  id: string;
  table_id: string;
  target: string;
  condition: string[];
  search: string[] | null;
  method: string;
  seed: number;
  proj_dim: number | null;
  k: number;
  index: { start_ts: number; end_ts: number; step: number; highlight?: [number, number] };
  parent: string | null;
  runs: number;
  derived: string[];
}

export interface ReportEntry {
  family: string;
  score: number;
  p_value: number;
  method: string;
  condition: string[];
  note?: string;
}

export interface RunReport {
  session: string;
  run: number;
  method: string;
  k: number;
  entries: ReportEntry[];
  failures: ReportEntry[];
  exclusions: Record<string, string>;
}

export interface RunStatus {
  status: "pending" | "done" | "failed";
  report?: RunReport;
  error?: string;
}

export interface PlotSeries {
  observed: number[];
  predicted: number[];
}

export interface SessionCreateRequest {
  table: string;
  target: string;
  condition?: string[];
  search?: string[] | null;
  method?: string;
  proj_dim?: number | null;
  seed?: number;
  k?: number;
  range?: [number, number];
  highlight?: [number, number];
}

export class ApiFailure extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: string, json = true): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) {
      headers["Content-Type"] = json ? "application/json" : "text/plain";
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, { method, headers, body });
    const payload = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiFailure(
        resp.status,
        String(payload["code"] ?? "internal"),
        String(payload["message"] ?? resp.statusText),
      );
    }
    return payload as T;
  }

  uploadDataset(jsonl: string): Promise<{ id: string; records: number; rejected: number }> {
    return this.request("POST", "/v1/datasets", jsonl, false);
  }

  runQueries(
    datasetId: string,
    queryText: string,
  ): Promise<{ table: string; families: string[]; features: number; index: SessionResource["index"] }> {
    return this.request("POST", `/v1/datasets/${datasetId}/queries`, queryText, false);
  }

  createSession(req: SessionCreateRequest): Promise<{ session: SessionResource }> {
    return this.request("POST", "/v1/sessions", JSON.stringify(req));
  }

  getSession(id: string): Promise<{ session: SessionResource; run_status: { run: number; status: string }[] }> {
    return this.request("GET", `/v1/sessions/${id}`);
  }

  startRun(id: string, token?: string): Promise<{ run: number; status: string }> {
    return this.request("POST", `/v1/sessions/${id}/run`, JSON.stringify(token ? { token } : {}));
  }

  getRun(id: string, run: number): Promise<RunStatus> {
    return this.request("GET", `/v1/sessions/${id}/runs/${run}`);
  }

  async pollRun(id: string, run: number, intervalMs = 150, timeoutMs = 120_000): Promise<RunReport> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      const status = await this.getRun(id, run);
      if (status.status === "done" && status.report) return status.report;
      if (status.status === "failed") throw new ApiFailure(500, "internal", status.error ?? "run failed");
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    throw new ApiFailure(504, "timeout", `run ${run} did not finish within ${timeoutMs}ms`);
  }

  getPlot(id: string, family: string): Promise<{ family: string; plot: PlotSeries }> {
    return this.request("GET", `/v1/sessions/${id}/plots/${encodeURIComponent(family)}`);
  }

  fork(id: string, overrides: Partial<SessionCreateRequest>): Promise<{ session: SessionResource }> {
    return this.request("POST", `/v1/sessions/${id}/fork`, JSON.stringify(overrides));
  }

  addPseudocause(
    id: string,
    kind: "seasonal" | "trend" | "custom-series",
    params: Record<string, unknown>,
    source?: string,
  ): Promise<{ key: string; condition: string[] }> {
    return this.request(
      "POST",
      `/v1/sessions/${id}/pseudocause`,
      JSON.stringify({ kind, params, ...(source ? { source } : {}) }),
    );
  }
}
