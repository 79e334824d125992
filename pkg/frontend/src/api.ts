/** Thin typed client over the advisor HTTP API.
 *
 * The fetch implementation is injectable so tests can run without a
 * network; every non-2xx response is surfaced as an Error carrying the
 * server's detail message, never swallowed.
 */

import type {
  ApiJob,
  ApiPrediction,
  ApiSelectResult,
  ApiTestTable,
  BudgetMode,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return `${response.status} ${response.statusText}`;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new Error(await parseError(response));
    }
    return (await response.json()) as T;
  }

  getTests(): Promise<ApiTestTable> {
    return this.request<ApiTestTable>("/tests");
  }

  putTests(table: ApiTestTable): Promise<ApiTestTable> {
    return this.request<ApiTestTable>("/tests", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(table),
    });
  }

  postSelect(mode: BudgetMode, budget: number): Promise<{ job_id: string }> {
    return this.request<{ job_id: string }>("/select", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ mode, budget }),
    });
  }

  getJob(jobId: string): Promise<ApiJob> {
    return this.request<ApiJob>(`/jobs/${jobId}`);
  }

  postPredict(record: Record<string, unknown>): Promise<ApiPrediction> {
    return this.request<ApiPrediction>("/predict", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ record }),
    });
  }
}

export type SelectResult = ApiSelectResult;
