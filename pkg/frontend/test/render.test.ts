/**
 * Renderer invariants: HTML structure, escaping, and the rule that every
 * estimate-bearing number in the output comes verbatim from a facade
 * response.
 */

import { beforeEach, describe, expect, it } from "vitest";

import type { DiffDoc, ExplainDoc, SessionDoc } from "../src/api.js";
import {
  escapeHtml,
  renderPlanTree,
  renderSqlError,
  renderStatsInspector,
  renderTableList,
  renderWhatifPanel,
} from "../src/render.js";
import {
  planTreeView,
  sqlErrorView,
  statsInspectorView,
  tableListView,
  whatifPanelView,
} from "../src/views.js";
import {
  exchange,
  loadRecording,
  responseNumbers,
  type Recording,
} from "./recorded.js";

let recording: Recording;

beforeEach(() => {
  recording = loadRecording();
});

function sessionDoc(): SessionDoc {
  return exchange(recording, "create_session").response.body as SessionDoc;
}

describe("escaping", () => {
  it("neutralizes markup in data", () => {
    expect(escapeHtml(`<img src=x onerror="pwn()">&'`))
      .toBe("&lt;img src=x onerror=&quot;pwn()&quot;&gt;&amp;&#39;");
  });
});

describe("table list", () => {
  it("marks the selected table and shows row counts", () => {
    const html = renderTableList(tableListView(sessionDoc()), "orders");
    expect(html).toContain('data-table="orders"');
    expect(html).toContain("table-row selected");
    expect(html).toContain("<td class=\"rows\">1200</td>");
  });
});

describe("stats inspector", () => {
  it("draws one bar per bucket with verbatim fractions", () => {
    const users = sessionDoc().tables.find((t) => t.name === "users")!;
    const html = renderStatsInspector(statsInspectorView(users));
    const buckets = users.columns.find((c) => c.name === "u_age")!
      .histogram!.buckets;
    for (const bucket of buckets) {
      expect(html).toContain(`data-fraction="${bucket.row_fraction}"`);
    }
    expect(html).toContain(`flex-grow:${buckets[0].row_fraction}`);
    expect(html).toContain("&Sigma; row_fraction = 1.00");
    expect(html).toContain("no histogram"); // the u_city placeholder
  });
});

describe("plan tree", () => {
  it("highlights the chosen candidate and tags virtual indexes", () => {
    const doc = exchange(recording, "explain_after_add").response
      .body as ExplainDoc;
    const html = renderPlanTree(planTreeView(doc));
    expect(html).toContain("candidate chosen");
    expect(html).toContain("virtual-tag");
    expect(html).toContain("chosen-edge");
    expect(html).toContain(`total_cost=<span class="total-cost">` +
      `${doc.total_cost}</span>`);
  });

  it("renders every estimate number verbatim from the document", () => {
    const doc = exchange(recording, "explain_join").response
      .body as ExplainDoc;
    const html = renderPlanTree(planTreeView(doc));
    const allowed = responseNumbers(recording);
    const spans = [...html.matchAll(
      /class="(?:est|cost|est-rows|op-cost|table-rows|total-cost)">([^<]+)</g)];
    expect(spans.length).toBeGreaterThan(4);
    for (const [, text] of spans) {
      expect(allowed.has(Number(text)), `${text} not in any response`)
        .toBe(true);
    }
  });
});

describe("what-if panel", () => {
  it("shows the facade's delta and q-errors verbatim", () => {
    const before = exchange(recording, "explain_base").response
      .body as ExplainDoc;
    const after = exchange(recording, "explain_after_add").response
      .body as ExplainDoc;
    const diff = exchange(recording, "diff_add").response.body as DiffDoc;
    const html = renderWhatifPanel(whatifPanelView(before, after, diff));
    expect(html).toContain("cost-down");
    expect(html).toContain(`Δ ${diff.total_cost_delta}`);
    expect(html).toContain(`<td class="q-error">${diff.operator_q_errors[0]}</td>`);
    const allowed = responseNumbers(recording);
    for (const [, text] of html.matchAll(
        /class="(?:rows-a|rows-b|q-error|avg-q)">([^<]+)</g)) {
      expect(allowed.has(Number(text)), `${text} not in any response`)
        .toBe(true);
    }
  });

  it("renders the plan-unchanged badge without a delta", () => {
    const a = exchange(recording, "explain_after_drop").response
      .body as ExplainDoc;
    const b = exchange(recording, "explain_with_unused").response
      .body as ExplainDoc;
    const diff = exchange(recording, "diff_unused_add").response
      .body as DiffDoc;
    const html = renderWhatifPanel(whatifPanelView(a, b, diff));
    expect(html).toContain("plan unchanged");
    expect(html).toContain("badge plan-unchanged");
  });
});

describe("sql error", () => {
  it("places the caret at the backend-reported position", () => {
    const body = exchange(recording, "explain_parse_error").response
      .body as { message: string };
    const view = sqlErrorView(recording.bad_sql, body.message);
    const html = renderSqlError(recording.bad_sql, view);
    const caret = html.match(/\n( *)\^/);
    expect(caret).not.toBeNull();
    expect(caret![1].length).toBe(view.position);
    expect(recording.bad_sql.slice(view.position!)).toMatch(/^LIKE/);
  });
});
