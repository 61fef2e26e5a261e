import type {
  ExportResponse,
  MethodsResponse,
  QueuePage,
  ReviewRequest,
  ReviewResponse,
  SentenceDetail,
  Stats,
} from "./types.js";

export interface QueueQuery {
  method?: string;
  tokenMethod?: string | null;
  sort?: "score" | "id";
  filter?: "all" | "unreviewed" | "reviewed";
  offset?: number;
  limit?: number;
}

// Everything the UI knows comes through this surface; scores, flags and
// rankings are never recomputed client-side.
export interface ReviewApi {
  methods(): Promise<MethodsResponse>;
  queue(query: QueueQuery): Promise<QueuePage>;
  sentence(id: number, tokenMethod?: string): Promise<SentenceDetail>;
  submitReview(id: number, body: ReviewRequest): Promise<ReviewResponse>;
  stats(): Promise<Stats>;
  exportCorrected(path?: string): Promise<ExportResponse>;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export class ApiClient implements ReviewApi {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    let body: unknown = null;
    try {
      body = await res.json();
    } catch {
      body = null;
    }
    if (!res.ok) {
      const detail =
        body !== null && typeof body === "object" && "detail" in body
          ? (body as { detail: unknown }).detail
          : body;
      throw new ApiError(res.status, detail);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  methods(): Promise<MethodsResponse> {
    return this.request("/api/methods");
  }

  queue(query: QueueQuery): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (query.method !== undefined) params.set("method", query.method);
    if (query.tokenMethod) params.set("token_method", query.tokenMethod);
    if (query.sort !== undefined) params.set("sort", query.sort);
    if (query.filter !== undefined) params.set("filter", query.filter);
    if (query.offset !== undefined) params.set("offset", String(query.offset));
    if (query.limit !== undefined) params.set("limit", String(query.limit));
    const qs = params.toString();
    return this.request(`/api/sentences${qs ? "?" + qs : ""}`);
  }

  sentence(id: number, tokenMethod?: string): Promise<SentenceDetail> {
    const suffix = tokenMethod ? `?token_method=${encodeURIComponent(tokenMethod)}` : "";
    return this.request(`/api/sentences/${id}${suffix}`);
  }

  submitReview(id: number, body: ReviewRequest): Promise<ReviewResponse> {
    return this.post(`/api/sentences/${id}/review`, body);
  }

  stats(): Promise<Stats> {
    return this.request("/api/stats");
  }

  exportCorrected(path?: string): Promise<ExportResponse> {
    return this.post("/api/export", path === undefined ? {} : { path });
  }
}
