/**
 * HTML renderers over the view models. Pure string generation so tests run
 * without a DOM; main.ts mounts the output.
 *
 * Numbers are interpolated verbatim (bar sizing hands the raw fraction to
 * CSS via flex-grow rather than precomputing pixel sizes).
 */

import type {
  ColumnStatsView,
  PlanNodeView,
  PlanTreeView,
  SqlErrorView,
  TableListRow,
  WhatifPanelView,
} from "./views.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderTableList(rows: TableListRow[],
                                selected: string | null): string {
  const items = rows.map((row) => {
    const cls = row.name === selected ? "table-row selected" : "table-row";
    return `<tr class="${cls}" data-table="${escapeHtml(row.name)}">` +
      `<td class="name">${escapeHtml(row.name)}</td>` +
      `<td class="rows">${row.rowCount}</td>` +
      `<td class="cols">${row.columnCount}</td>` +
      `<td class="indexes">${row.indexNames.map(escapeHtml).join(", ")}</td>` +
      `</tr>`;
  });
  return `<table class="table-list"><thead><tr>` +
    `<th>table</th><th>rows</th><th>columns</th><th>indexes</th>` +
    `</tr></thead><tbody>${items.join("")}</tbody></table>`;
}

export function renderStatsInspector(views: ColumnStatsView[]): string {
  const blocks = views.map((v) => {
    const header =
      `<div class="col-header"><span class="col-name">${escapeHtml(v.name)}</span>` +
      ` <span class="col-type">${escapeHtml(v.type)}</span>` +
      ` ndv=<span class="ndv">${v.ndv ?? "-"}</span>` +
      ` null_fraction=<span class="nullfrac">${v.nullFraction ?? "-"}</span>` +
      ` range=[${escapeHtml(v.minLabel)}, ${escapeHtml(v.maxLabel)}]</div>`;
    if (v.bars === null) {
      return `<div class="column-stats">${header}` +
        `<div class="no-histogram">no histogram</div></div>`;
    }
    const bars = v.bars.map((b) =>
      `<div class="bar" style="flex-grow:${b.fraction}" ` +
      `title="${escapeHtml(b.tooltip)}" data-fraction="${b.fraction}" ` +
      `data-distinct="${b.distinctCount}"></div>`).join("");
    return `<div class="column-stats">${header}` +
      `<div class="histogram">${bars}</div>` +
      `<div class="fraction-sum">&Sigma; row_fraction = ${v.fractionSumLabel}</div>` +
      `</div>`;
  });
  return `<div class="stats-inspector">${blocks.join("")}</div>`;
}

function renderCandidate(node: PlanNodeView, index: number): string {
  const c = node.candidates[index];
  const cls = c.chosen ? "candidate chosen" : "candidate";
  const origin = c.origin === "virtual"
    ? ` <span class="virtual-tag">virtual</span>` : "";
  return `<li class="${cls}">${escapeHtml(c.kind)}` +
    `(${escapeHtml(c.indexName)})${origin}` +
    ` est_rows=<span class="est">${c.estRows}</span>` +
    ` cost=<span class="cost">${c.cost}</span></li>`;
}

export function renderPlanTree(view: PlanTreeView): string {
  // left-deep chains render as a vertical spine, outermost table on top;
  // the chosen path into each node carries the highlighted edge
  const nodes = view.nodes.map((node) => {
    const chosenOrigin = node.chosen.origin === "virtual"
      ? ` <span class="virtual-tag">virtual</span>` : "";
    const candidates = node.candidates
      .map((_, i) => renderCandidate(node, i)).join("");
    return `<div class="plan-node" data-table="${escapeHtml(node.table)}">` +
      `<div class="edge chosen-edge"></div>` +
      `<div class="node-card">` +
      `<div class="node-title">${escapeHtml(node.table)}` +
      ` <span class="path">${escapeHtml(node.chosen.kind)}` +
      `(${escapeHtml(node.chosen.indexName)})</span>${chosenOrigin}</div>` +
      `<div class="node-detail" hidden>` +
      `table_rows=<span class="table-rows">${node.detail.tableRows}</span> ` +
      `est_rows=<span class="est-rows">${node.detail.estRows}</span> ` +
      `cost=<span class="op-cost">${node.detail.cost}</span></div>` +
      `<ul class="candidates">${candidates}</ul>` +
      `</div></div>`;
  });
  const provenance = Object.entries(view.provenance)
    .map(([k, v]) => `${escapeHtml(k)}=${escapeHtml(String(v))}`).join(" ");
  return `<div class="plan-tree">` +
    `<div class="plan-query">${escapeHtml(view.query)}</div>` +
    nodes.join("") +
    `<div class="plan-total">total_cost=<span class="total-cost">` +
    `${view.totalCost}</span></div>` +
    `<div class="plan-provenance">${provenance}</div>` +
    `</div>`;
}

export function renderWhatifPanel(view: WhatifPanelView): string {
  const badgeText = {
    "plan-unchanged": "plan unchanged",
    "cost-down": `cost down (Δ ${view.deltaCost})`,
    "cost-up": `cost up (Δ ${view.deltaCost})`,
  }[view.badge];
  const rows = view.qErrorRows.map((r) =>
    `<tr><td>${escapeHtml(r.table)}</td>` +
    `<td class="rows-a">${r.rowsA}</td>` +
    `<td class="rows-b">${r.rowsB}</td>` +
    `<td class="q-error">${r.qError}</td></tr>`).join("");
  const diffs = view.pathDifferences.map((d) =>
    `<li>${escapeHtml(d.table)}: ` +
    `${d.a ? escapeHtml(`${d.a.kind}(${d.a.index ?? "-"})`) : "-"} → ` +
    `${d.b ? escapeHtml(`${d.b.kind}(${d.b.index ?? "-"})`) : "-"}</li>`)
    .join("");
  return `<div class="whatif-panel">` +
    `<div class="badge ${view.badge}">${badgeText}</div>` +
    `<div class="order">join order ${view.joinOrderEqual ? "equal" : "changed"},` +
    ` index selection ${view.indexSelectionEqual ? "equal" : "changed"},` +
    ` avg q-error <span class="avg-q">${view.avgQError}</span></div>` +
    (diffs ? `<ul class="path-diffs">${diffs}</ul>` : "") +
    `<table class="q-errors"><thead><tr><th>operator</th><th>rows A</th>` +
    `<th>rows B</th><th>q-error</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></div>`;
}

export function renderSqlError(sql: string, view: SqlErrorView): string {
  const caret = view.caretLine !== null
    ? `<pre class="sql-caret">${escapeHtml(sql)}\n${view.caretLine}</pre>`
    : "";
  return `<div class="sql-error"><div class="message">` +
    `${escapeHtml(view.message)}</div>${caret}</div>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner">${escapeHtml(message)}` +
    `<button class="retry">retry</button></div>`;
}
