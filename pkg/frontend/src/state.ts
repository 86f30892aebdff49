/**
 * Console state and controller.
 *
 * One Console per session: connect uploads metadata (or re-attaches by
 * session id), then inspection / EXPLAIN / what-if actions mutate the
 * state strictly from facade responses. Facade calls are serialized per
 * console; no client-side estimation ever happens here.
 */

import {
  FacadeClient,
  FacadeError,
  type DiffDoc,
  type ExplainDoc,
  type SessionDoc,
} from "./api.js";
import { sqlErrorView, type SqlErrorView } from "./views.js";

export interface ConsoleState {
  session: SessionDoc | null;
  selectedTable: string | null;
  currentExplain: ExplainDoc | null;
  previousExplain: ExplainDoc | null;
  lastDiff: DiffDoc | null;
  lastSql: string | null;
  sqlError: SqlErrorView | null;
  connectionError: string | null;
}

export function initialState(): ConsoleState {
  return {
    session: null,
    selectedTable: null,
    currentExplain: null,
    previousExplain: null,
    lastDiff: null,
    lastSql: null,
    sqlError: null,
    connectionError: null,
  };
}

export class Console {
  readonly state: ConsoleState = initialState();
  private chain: Promise<unknown> = Promise.resolve();

  constructor(private readonly client: FacadeClient) {}

  /** Facade calls run one at a time per console (one browser tab). */
  private serialize<T>(work: () => Promise<T>): Promise<T> {
    const next = this.chain.then(work, work);
    this.chain = next.catch(() => undefined);
    return next;
  }

  connect(metadata: unknown, model: string): Promise<SessionDoc> {
    return this.serialize(async () => {
      try {
        const session = await this.client.createSession(metadata, model);
        this.state.session = session;
        this.state.selectedTable = session.tables[0]?.name ?? null;
        this.state.connectionError = null;
        return session;
      } catch (error) {
        this.state.connectionError = describe(error);
        throw error;
      }
    });
  }

  reattach(sessionId: string): Promise<SessionDoc> {
    return this.serialize(async () => {
      const session = await this.client.getSession(sessionId);
      this.state.session = session;
      this.state.connectionError = null;
      return session;
    });
  }

  selectTable(name: string): void {
    if (this.state.session?.tables.some((t) => t.name === name)) {
      this.state.selectedTable = name;
    }
  }

  private get sessionId(): string {
    const session = this.state.session;
    if (session === null) throw new Error("not connected");
    return session.session_id;
  }

  runExplain(sql: string): Promise<ExplainDoc | null> {
    return this.serialize(async () => {
      try {
        const doc = await this.client.explain(this.sessionId, sql);
        this.state.previousExplain = this.state.currentExplain;
        this.state.currentExplain = doc;
        this.state.lastSql = sql;
        this.state.sqlError = null;
        this.state.lastDiff = null;
        return doc;
      } catch (error) {
        if (error instanceof FacadeError && error.body.code === "SQL_ERROR") {
          this.state.sqlError = sqlErrorView(sql, error.body.message);
          return null;
        }
        throw error;
      }
    });
  }

  /**
   * Add or drop a virtual index and, when an EXPLAIN has run, re-run it and
   * fetch the before/after diff from the facade.
   */
  addVirtualIndex(table: string, columns: string[],
                  name?: string): Promise<DiffDoc | null> {
    return this.mutateIndexes(() =>
      this.client.addVirtualIndex(this.sessionId, table, columns, name));
  }

  dropVirtualIndex(name: string): Promise<DiffDoc | null> {
    return this.mutateIndexes(() =>
      this.client.dropVirtualIndex(this.sessionId, name));
  }

  private mutateIndexes(mutate: () => Promise<unknown>): Promise<DiffDoc | null> {
    return this.serialize(async () => {
      await mutate();
      const sql = this.state.lastSql;
      if (sql === null) return null;
      const before = this.state.currentExplain;
      const after = await this.client.explain(this.sessionId, sql);
      this.state.previousExplain = before;
      this.state.currentExplain = after;
      if (before === null) return null;
      const diff = await this.client.diff(before, after);
      this.state.lastDiff = diff;
      return diff;
    });
  }
}

function describe(error: unknown): string {
  if (error instanceof FacadeError) {
    return `${error.body.code}: ${error.body.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
