/**
 * Typed client for the serving API. The console performs no access-control
 * logic of its own: everything shown to the operator is exactly what these
 * endpoints returned.
 */

export interface ActiveAdapter {
  id: string;
  weight: number;
}

export interface Hint {
  id: string;
  metadata: Record<string, string>;
}

export interface Timing {
  embed_ms: number;
  retrieve_ms: number;
  ttft_ms: number;
}

export interface QueryOutcome {
  response: number[];
  trace: string;
  active: ActiveAdapter[];
  hints: Hint[];
  timing: Timing;
}

export interface QueryOverrides {
  k?: number;
  fetch_k?: number;
  threshold?: number;
  hints_enabled?: boolean;
}

export interface Metrics {
  queries_total: number;
  hints_total: number;
  ttft_ms_bucket_labels: string[];
  ttft_ms_histogram: Record<string, number[]>;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseJson(response: Response): Promise<any> {
  const text = await response.text();
  try {
    return text ? JSON.parse(text) : {};
  } catch {
    return { error: text };
  }
}

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string = "",
    private adminToken: string | null = null,
  ) {}

  setAdminToken(token: string | null): void {
    this.adminToken = token;
  }

  hasAdminToken(): boolean {
    return this.adminToken !== null && this.adminToken !== "";
  }

  private async request(method: string, path: string, body?: unknown, admin = false): Promise<any> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (admin && this.adminToken) {
      headers["X-Admin-Token"] = this.adminToken;
    }
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await parseJson(response);
    if (!response.ok) {
      throw new ApiError(response.status, payload.error ?? `HTTP ${response.status}`);
    }
    return payload;
  }

  async query(userId: string, query: string, overrides: QueryOverrides = {}): Promise<QueryOutcome> {
    return this.request("POST", "/v1/query", { user_id: userId, query, ...overrides });
  }

  async putPermissions(userId: string, grants: string[]): Promise<void> {
    await this.request("PUT", `/v1/admin/permissions/${encodeURIComponent(userId)}`, { grants }, true);
  }

  async metrics(): Promise<Metrics> {
    return this.request("GET", "/v1/metrics");
  }
}
