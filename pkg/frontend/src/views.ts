/**
 * Pure view-model builders: facade documents in, render-ready structures
 * out. Every number in a view model is copied verbatim from a facade
 * response; the only transformations are string formatting.
 */

import type {
  ColumnDoc,
  DiffDoc,
  ExplainDoc,
  SessionDoc,
  TableDoc,
} from "./api.js";

export interface TableListRow {
  name: string;
  rowCount: number;
  columnCount: number;
  indexNames: string[];
}

export function tableListView(session: SessionDoc): TableListRow[] {
  return session.tables.map((t) => ({
    name: t.name,
    rowCount: t.row_count,
    columnCount: t.columns.length,
    indexNames: t.indexes.map((i) => i.name),
  }));
}

export interface HistogramBar {
  fraction: number;
  distinctCount: number;
  lowerLabel: string;
  upperLabel: string;
  tooltip: string;
}

export interface ColumnStatsView {
  name: string;
  type: string;
  ndv: number | null;
  nullFraction: number | null;
  minLabel: string;
  maxLabel: string;
  bars: HistogramBar[] | null; // null: "no histogram" placeholder
  fractionSumLabel: string | null;
}

export function statsInspectorView(table: TableDoc): ColumnStatsView[] {
  return table.columns.map(columnStatsView);
}

function columnStatsView(column: ColumnDoc): ColumnStatsView {
  const hist = column.histogram ?? null;
  let bars: HistogramBar[] | null = null;
  let fractionSumLabel: string | null = null;
  if (hist !== null) {
    bars = hist.buckets.map((b) => ({
      fraction: b.row_fraction,
      distinctCount: b.distinct_count,
      lowerLabel: scalarLabel(b.lower.value),
      upperLabel: scalarLabel(b.upper.value),
      tooltip: `[${scalarLabel(b.lower.value)}, ${scalarLabel(b.upper.value)}]` +
        ` fraction=${b.row_fraction} distinct_count=${b.distinct_count}`,
    }));
    const sum = bars.reduce((acc, b) => acc + b.fraction, 0);
    fractionSumLabel = sum.toFixed(2);
  }
  return {
    name: column.name,
    type: column.type,
    ndv: column.ndv ?? null,
    nullFraction: column.null_fraction ?? null,
    minLabel: column.min != null ? scalarLabel(column.min.value) : "-",
    maxLabel: column.max != null ? scalarLabel(column.max.value) : "-",
    bars,
    fractionSumLabel,
  };
}

function scalarLabel(value: number | string): string {
  return typeof value === "number" ? String(value) : value;
}

export interface CandidateView {
  kind: string;
  indexName: string;
  origin: string | null;
  cost: number;
  estRows: number;
  chosen: boolean;
}

export interface PlanNodeView {
  position: number;
  table: string;
  tableName: string;
  chosen: CandidateView;
  candidates: CandidateView[];
  detail: {
    tableRows: number;
    estRows: number;
    cost: number;
  };
}

export interface PlanTreeView {
  query: string;
  model: string;
  joinOrder: string[];
  nodes: PlanNodeView[]; // left-deep chain, outermost first
  totalCost: number;
  signature: string;
  provenance: Record<string, unknown>;
}

export function planTreeView(doc: ExplainDoc): PlanTreeView {
  return {
    query: doc.query,
    model: doc.model,
    joinOrder: doc.join_order,
    totalCost: doc.total_cost,
    signature: doc.signature,
    provenance: doc.provenance,
    nodes: doc.operators.map((op, position) => ({
      position,
      table: op.table,
      tableName: op.table_name,
      chosen: {
        kind: op.access_path.kind,
        indexName: op.access_path.index ?? "-",
        origin: op.access_path.origin,
        cost: op.access_path.cost,
        estRows: op.access_path.est_rows,
        chosen: true,
      },
      candidates: op.candidates.map((c) => ({
        kind: c.kind,
        indexName: c.index ?? "-",
        origin: c.origin,
        cost: c.cost,
        estRows: c.est_rows,
        chosen: c.chosen === true,
      })),
      detail: {
        tableRows: op.table_rows,
        estRows: op.est_rows,
        cost: op.cost,
      },
    })),
  };
}

export type WhatifBadge = "plan-unchanged" | "cost-down" | "cost-up";

export interface QErrorRow {
  position: number;
  table: string;
  rowsA: number;
  rowsB: number;
  qError: number;
}

export interface WhatifPanelView {
  badge: WhatifBadge;
  deltaCost: number;
  avgQError: number;
  joinOrderEqual: boolean;
  indexSelectionEqual: boolean;
  qErrorRows: QErrorRow[];
  pathDifferences: DiffDoc["path_differences"];
}

export function whatifPanelView(before: ExplainDoc, after: ExplainDoc,
                                diff: DiffDoc): WhatifPanelView {
  let badge: WhatifBadge;
  if (after.signature === before.signature) {
    badge = "plan-unchanged";
  } else if (diff.total_cost_delta < 0) {
    badge = "cost-down";
  } else {
    badge = "cost-up";
  }
  return {
    badge,
    deltaCost: diff.total_cost_delta,
    avgQError: diff.avg_q_error,
    joinOrderEqual: diff.join_order_equal,
    indexSelectionEqual: diff.index_selection_equal,
    qErrorRows: diff.operator_rows.map(([rowsA, rowsB], position) => ({
      position,
      table: after.join_order[position] ?? `#${position}`,
      rowsA,
      rowsB,
      qError: diff.operator_q_errors[position],
    })),
    pathDifferences: diff.path_differences,
  };
}

export interface SqlErrorView {
  message: string;
  position: number | null; // character offset when the backend reports one
  caretLine: string | null;
}

export function sqlErrorView(sql: string, message: string): SqlErrorView {
  const match = /position (\d+)/.exec(message);
  if (match === null) {
    return { message, position: null, caretLine: null };
  }
  const position = Number(match[1]);
  return {
    message,
    position,
    caretLine: " ".repeat(position) + "^",
  };
}
