import type {
  ComplianceReport,
  HeatmapMatrix,
  IssuesResponse,
  PolicySummary,
  RunRecord,
  ValidationDetail,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}`);
  }

  /** Field-by-field card validation report when the server sent one. */
  get validation(): ValidationDetail | null {
    if (this.status === 400 && this.detail && typeof this.detail === "object") {
      const d = this.detail as Record<string, unknown>;
      if (Array.isArray(d.missing)) return this.detail as ValidationDetail;
    }
    return null;
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) return (await response.json()) as T;
  let detail: unknown = null;
  try {
    detail = ((await response.json()) as { detail?: unknown }).detail;
  } catch {
    detail = await response.text().catch(() => null);
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ status: string }> {
    return unwrap(await fetch(this.url("/healthz")));
  }

  async listPolicies(): Promise<PolicySummary[]> {
    return unwrap(await fetch(this.url("/policies")));
  }

  async uploadCard(text: string): Promise<{ card_id: string; title: string }> {
    return unwrap(
      await fetch(this.url("/cards"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
  }

  async createRun(
    cardId: string,
    policyIds: string[],
    force = false,
  ): Promise<{ run_id: string; status: string }> {
    return unwrap(
      await fetch(this.url("/runs"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ card_id: cardId, policy_ids: policyIds, force }),
      }),
    );
  }

  async getRun(runId: string): Promise<RunRecord> {
    return unwrap(await fetch(this.url(`/runs/${runId}`)));
  }

  async getReport(runId: string): Promise<ComplianceReport> {
    return unwrap(await fetch(this.url(`/runs/${runId}/report`)));
  }

  async getHeatmap(runId: string, policyId: string): Promise<HeatmapMatrix> {
    return unwrap(await fetch(this.url(`/runs/${runId}/heatmap/${policyId}`)));
  }

  async getIssues(runId: string, policy?: string): Promise<IssuesResponse> {
    const query = policy ? `?policy=${encodeURIComponent(policy)}` : "";
    return unwrap(await fetch(this.url(`/runs/${runId}/issues${query}`)));
  }
}
