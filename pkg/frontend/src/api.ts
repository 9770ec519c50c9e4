// Typed client for the engine's HTTP API. The UI never recomputes numbers:
// everything shown comes from these endpoints.

import type {
  CentralityPayload,
  ChordPayload,
  DimensionSummary,
  EvaluationsPayload,
  EvolutionPayload,
  FrequencyPayload,
  GoldSetPayload,
  JobInfo,
  OccurrencePayload,
  PapersPage,
  TaxonomyIndex,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: unknown;

  constructor(status: number, code: string, message: string, detail: unknown) {
    super(message);
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

export interface PaperQuery {
  keyword?: string;
  yearFrom?: number;
  yearTo?: number;
  labels?: { dimension: string; label: string; include: boolean }[];
  limit?: number;
  offset?: number;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = "error";
      let message = `HTTP ${response.status}`;
      let detail: unknown = null;
      try {
        const body = await response.json();
        detail = body.detail ?? body;
        if (body.detail && typeof body.detail === "object") {
          code = body.detail.code ?? code;
          message = body.detail.message ?? message;
        }
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message, detail);
    }
    return (await response.json()) as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>(path, { headers: this.headers() });
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
  }

  healthz(): Promise<{ status: string; store: string }> {
    return this.get("/healthz");
  }

  papers(query: PaperQuery): Promise<PapersPage> {
    const params = new URLSearchParams();
    if (query.keyword) params.set("keyword", query.keyword);
    if (query.yearFrom !== undefined) params.set("year_from", String(query.yearFrom));
    if (query.yearTo !== undefined) params.set("year_to", String(query.yearTo));
    for (const c of query.labels ?? []) {
      params.append("label", `${c.dimension}:${c.include ? "" : "!"}${c.label}`);
    }
    if (query.limit !== undefined) params.set("limit", String(query.limit));
    if (query.offset !== undefined) params.set("offset", String(query.offset));
    const qs = params.toString();
    return this.get(`/papers${qs ? `?${qs}` : ""}`);
  }

  taxonomy(): Promise<TaxonomyIndex> {
    return this.get("/taxonomy");
  }

  dimension(dimensionId: string): Promise<DimensionSummary & Record<string, unknown>> {
    return this.get(`/taxonomy/${dimensionId}`);
  }

  promptVersions(dimensionId: string) {
    return this.get<import("./types").PromptVersions>(`/prompts/${dimensionId}/versions`);
  }

  editConstraints(dimensionId: string, constraints: string[], editor: string) {
    return this.post<{ dimension_id: string; prompt_version: number }>(
      `/prompts/${dimensionId}/constraints`,
      { constraints, editor },
    );
  }

  gold(dimensionId: string): Promise<GoldSetPayload> {
    return this.get(`/gold/${dimensionId}`);
  }

  submitGold(dimensionId: string, paperId: string, labels: string[],
             annotator: string, overwrite = true) {
    return this.post<{ replaced: boolean; annotated: number }>(
      `/gold/${dimensionId}`,
      { paper_id: paperId, labels, annotator, overwrite },
    );
  }

  submitClassify(dimensionId: string, modelName?: string, repetitions?: number) {
    return this.post<JobInfo>("/jobs/classify", {
      dimension_id: dimensionId,
      model_name: modelName ?? null,
      repetitions: repetitions ?? null,
    });
  }

  job(jobId: string): Promise<JobInfo> {
    return this.get(`/jobs/${jobId}`);
  }

  cancelJob(jobId: string) {
    return this.post<{ job: JobInfo; cancelled: boolean; note: string }>(
      `/jobs/${jobId}/cancel`, {},
    );
  }

  evaluations(dimensionId: string): Promise<EvaluationsPayload> {
    return this.get(`/evaluations/${dimensionId}`);
  }

  centrality(measure: string, k: number, dimension?: string, label?: string,
             ): Promise<CentralityPayload> {
    const params = new URLSearchParams({ measure, k: String(k) });
    if (dimension) params.set("dimension", dimension);
    if (label) params.set("label", label);
    return this.get(`/network/centrality?${params.toString()}`);
  }

  frequency(dimensionId: string, minCount = 10): Promise<FrequencyPayload> {
    return this.get(`/analytics/frequency/${dimensionId}?min_count=${minCount}`);
  }

  occurrence(): Promise<OccurrencePayload> {
    return this.get("/analytics/occurrence");
  }

  chord(): Promise<ChordPayload> {
    return this.get("/analytics/chord");
  }

  evolution(kind: "cooccurrence" | "citation"): Promise<EvolutionPayload> {
    return this.get(`/analytics/evolution?kind=${kind}`);
  }
}
