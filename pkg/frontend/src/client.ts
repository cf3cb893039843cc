import { EffectsResponse, ErrorBody, ErrorResponse, SessionDetail, SessionList } from "./types.js";

/** A non-2xx service reply, carrying the decoded error envelope when present. */
export class ApiError extends Error {
  status: number;
  body: ErrorBody | null;

  constructor(status: number, body: ErrorBody | null) {
    super(body ? `${body.type}: ${body.message}` : `HTTP ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.body = body;
  }
}

/** Network-level failure: the service itself could not be reached. */
export class ServiceDownError extends Error {
  constructor(baseUrl: string, cause: unknown) {
    super(`service unreachable at ${baseUrl}`);
    this.name = "ServiceDownError";
    this.cause = cause;
  }
}

export interface EffectsParams {
  outcome: string;
  arm: string;
  groupBy?: string[];
  covariance?: string;
  level?: number;
}

/** Build the effects-query URL; exported so URL construction is testable. */
export function effectsUrl(baseUrl: string, sessionId: string, params: EffectsParams): string {
  const search = new URLSearchParams();
  search.set("outcome", params.outcome);
  search.set("arm", params.arm);
  for (const key of params.groupBy ?? []) {
    search.append("group_by", key);
  }
  if (params.covariance) search.set("covariance", params.covariance);
  if (params.level !== undefined) search.set("level", String(params.level));
  return `${baseUrl}/sessions/${encodeURIComponent(sessionId)}/effects?${search}`;
}

/** The slice of the fetch Response the client relies on. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string) => Promise<ResponseLike>;

/**
 * Thin typed client for the service's JSON API.  The base URL is
 * configurable so the dashboard can point at any deployment; the fetch
 * function is injectable so tests run without a network.
 */
export class DashboardClient {
  readonly baseUrl: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url) => fetch(url));
  }

  private async get<T>(url: string): Promise<T> {
    let response: ResponseLike;
    try {
      response = await this.fetchFn(url);
    } catch (err) {
      throw new ServiceDownError(this.baseUrl, err);
    }
    if (!response.ok) {
      let body: ErrorBody | null = null;
      try {
        body = ((await response.json()) as ErrorResponse).error ?? null;
      } catch {
        body = null;
      }
      throw new ApiError(response.status, body);
    }
    return (await response.json()) as T;
  }

  listSessions(): Promise<SessionList> {
    return this.get<SessionList>(`${this.baseUrl}/sessions`);
  }

  getSession(sessionId: string): Promise<SessionDetail> {
    return this.get<SessionDetail>(`${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}`);
  }

  getEffects(sessionId: string, params: EffectsParams): Promise<EffectsResponse> {
    return this.get<EffectsResponse>(effectsUrl(this.baseUrl, sessionId, params));
  }
}
