// Response shapes of the lmfx HTTP service (schema_version "1").  Field
// names match the service JSON exactly; the dashboard never invents or
// recomputes any of these values, it only displays them.

export interface Diagnostics {
  n: number;
  p: number;
  groups: number;
  compression_ratio: number;
  outcomes: string[];
  arms: string[];
  reference: string;
  grouping_keys: string[];
  n_clusters: number;
  fit_count: number;
  timings: Record<string, number>;
  created_at: string;
}

export interface SessionSummary {
  session_id: string;
  created_at: string;
  n: number;
  p: number;
  groups: number;
  compression_ratio: number;
  fit_seconds: number;
  fit_count: number;
}

export interface SessionList {
  schema_version: string;
  sessions: SessionSummary[];
}

export interface SessionDetail {
  schema_version: string;
  session_id: string;
  diagnostics: Diagnostics;
}

/** One estimated effect cell: the whole table row comes from this object. */
export interface Effect {
  outcome: string;
  arm: string;
  estimate: number;
  std_error: number;
  statistic: number | null;
  p_value: number;
  ci_low: number;
  ci_high: number;
  n_group: number;
  group_key: (string | number)[];
  arm_support: string;
  covariance: string;
}

export interface QueryEcho {
  outcome: string;
  arm: string;
  group_by: string[];
  covariance: string;
  confidence_level: number;
}

export interface EffectsResponse {
  schema_version: string;
  session_id: string;
  query: QueryEcho;
  effects: Effect[];
  elapsed_seconds: number;
}

export interface ErrorBody {
  type: string;
  message: string;
  column: string | null;
  term_index: number | null;
}

export interface ErrorResponse {
  schema_version: string;
  error: ErrorBody;
}

export const COVARIANCE_TYPES = ["homoskedastic", "hc0", "hc1", "cr1"] as const;
