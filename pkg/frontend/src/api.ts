/** Typed client for the annotation service HTTP API. */

import type {
  Decision,
  ExportDoc,
  Item,
  Prediction,
  Stats,
  VocabResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;
  readonly suggestions: string[];

  constructor(status: number, detail: string, suggestions: string[] = []) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
    this.suggestions = suggestions;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail = resp.statusText;
  let suggestions: string[] = [];
  try {
    const body = (await resp.json()) as { detail?: unknown; suggestions?: string[] };
    if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    if (typeof body.detail === "string") detail = body.detail;
    if (Array.isArray(body.suggestions)) suggestions = body.suggestions;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(resp.status, detail, suggestions);
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    await raiseForStatus(resp);
    return resp;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.request(path);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await resp.json()) as T;
  }

  ingest(prediction: Prediction): Promise<Item> {
    return this.postJson<Item>("/shapes", prediction);
  }

  /** Lease the next queue item, or null when the queue is empty (204). */
  async queueNext(reviewer: string): Promise<Item | null> {
    const resp = await this.request(`/queue/next?reviewer=${encodeURIComponent(reviewer)}`);
    if (resp.status === 204) return null;
    return (await resp.json()) as Item;
  }

  getItem(itemId: string): Promise<Item> {
    return this.getJson<Item>(`/items/${encodeURIComponent(itemId)}`);
  }

  submitDecision(itemId: string, decision: Decision): Promise<Item> {
    return this.postJson<Item>(`/items/${encodeURIComponent(itemId)}/decision`, decision);
  }

  vocab(objectClass: string): Promise<VocabResponse> {
    return this.getJson<VocabResponse>(`/vocab?class=${encodeURIComponent(objectClass)}`);
  }

  async exportItems(statuses?: string[]): Promise<ExportDoc> {
    const query = statuses && statuses.length > 0
      ? `?status=${encodeURIComponent(statuses.join(","))}`
      : "";
    return this.getJson<ExportDoc>(`/export${query}`);
  }

  stats(): Promise<Stats> {
    return this.getJson<Stats>("/stats");
  }
}
