/**
 * Typed client for the session facade.
 *
 * This module is the console's only path to the backend; it issues exactly
 * the documented endpoints and nothing else, so the contract tests can
 * replay a recorded facade byte for byte.
 */

export interface ScalarDoc {
  type: string;
  value: number | string;
}

export interface HistogramBucketDoc {
  lower: ScalarDoc;
  upper: ScalarDoc;
  row_fraction: number;
  distinct_count: number;
}

export interface ColumnDoc {
  name: string;
  type: string;
  nullable: boolean;
  ndv?: number;
  null_fraction?: number;
  min?: ScalarDoc | null;
  max?: ScalarDoc | null;
  histogram?: { buckets: HistogramBucketDoc[] } | null;
}

export interface IndexDoc {
  name: string;
  columns: string[];
  unique: boolean;
  origin: string;
  table?: string; // present on session-level virtual index entries
}

export interface TableDoc {
  name: string;
  row_count: number;
  data_size_bytes: number;
  page_count: number;
  indexes: IndexDoc[];
  columns: ColumnDoc[];
}

export interface SessionDoc {
  session_id: string;
  task_id: string;
  model: string;
  stats_url: string;
  tables: TableDoc[];
  virtual_indexes: IndexDoc[];
}

export interface AccessPathDoc {
  kind: string;
  index: string | null;
  origin: string | null;
  matched_columns: string[];
  matched_join_columns: string[];
  est_rows: number;
  cost: number;
  chosen?: boolean;
}

export interface OperatorDoc {
  table: string;
  table_name: string;
  access_path: AccessPathDoc;
  table_rows: number;
  est_rows: number;
  cost: number;
  candidates: AccessPathDoc[];
}

export interface ExplainDoc {
  query: string;
  model: string;
  join_order: string[];
  operators: OperatorDoc[];
  total_cost: number;
  signature: string;
  provenance: Record<string, unknown>;
  group_by?: { columns: string[]; estimated_groups: number };
}

export interface DiffDoc {
  query: string;
  join_order_equal: boolean;
  index_selection_equal: boolean;
  path_differences: Array<{
    table: string;
    a: { kind: string; index: string | null } | null;
    b: { kind: string; index: string | null } | null;
  }>;
  operator_rows: Array<[number, number]>;
  operator_q_errors: number[];
  avg_q_error: number;
  total_cost_a: number;
  total_cost_b: number;
  total_cost_delta: number;
}

export interface ErrorBody {
  code: string;
  message: string;
  path: string;
}

export class FacadeError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export class FacadeClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(method: string, path: string,
                           body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body !== undefined
        ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const parsed = await response.json();
    if (response.status !== 200) {
      throw new FacadeError(response.status, parsed as ErrorBody);
    }
    return parsed as T;
  }

  createSession(metadata: unknown, model: string): Promise<SessionDoc> {
    return this.request("POST", "/v1/sessions", { metadata, model });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  explain(sessionId: string, sql: string): Promise<ExplainDoc> {
    return this.request("POST", `/v1/sessions/${sessionId}/explain`, { sql });
  }

  addVirtualIndex(sessionId: string, table: string, columns: string[],
                  name?: string): Promise<IndexDoc> {
    const body: Record<string, unknown> = { table, columns };
    if (name !== undefined) body.name = name;
    return this.request("POST",
      `/v1/sessions/${sessionId}/virtual-indexes`, body);
  }

  dropVirtualIndex(sessionId: string, name: string): Promise<{ dropped: string }> {
    return this.request("DELETE",
      `/v1/sessions/${sessionId}/virtual-indexes/${name}`);
  }

  diff(a: ExplainDoc, b: ExplainDoc): Promise<DiffDoc> {
    return this.request("POST", "/v1/diff", { a, b });
  }
}
