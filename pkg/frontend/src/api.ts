/** Minimal client for the transform service's three endpoints. */

import type {
  SceneDetail,
  SceneListing,
  ServiceErrorBody,
  TransformRequest,
  TransformResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly reason: string,
    detail?: string,
  ) {
    super(detail ? `${reason} (${detail})` : reason);
  }
}

async function parseError(resp: Response): Promise<never> {
  let body: ServiceErrorBody = { reason: `http_${resp.status}` };
  try {
    body = (await resp.json()) as ServiceErrorBody;
  } catch {
    // non-JSON error body; keep the status-derived reason
  }
  throw new ServiceError(resp.status, body.reason, body.detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(this.baseUrl + "/health");
      return resp.ok;
    } catch {
      return false;
    }
  }

  listScenes(): Promise<SceneListing> {
    return this.getJson<SceneListing>("/scenes");
  }

  getScene(id: string, includeTracks = false): Promise<SceneDetail> {
    const suffix = includeTracks ? "?tracks=1" : "";
    return this.getJson<SceneDetail>(`/scenes/${encodeURIComponent(id)}${suffix}`);
  }

  async transform(request: TransformRequest): Promise<TransformResponse> {
    const resp = await this.fetchImpl(this.baseUrl + "/transform", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as TransformResponse;
  }
}
