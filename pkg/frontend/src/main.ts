/**
 * Browser entry point: wires the console controller to the page. All logic
 * lives in state.ts / views.ts / render.ts; this file only reads inputs,
 * triggers actions, and mounts rendered HTML.
 */

import { FacadeClient } from "./api.js";
import { Console } from "./state.js";
import {
  renderErrorBanner,
  renderPlanTree,
  renderSqlError,
  renderStatsInspector,
  renderTableList,
  renderWhatifPanel,
} from "./render.js";
import {
  planTreeView,
  statsInspectorView,
  tableListView,
  whatifPanelView,
} from "./views.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function mount(): void {
  let console_: Console | null = null;

  const render = () => {
    if (console_ === null) return;
    const state = console_.state;
    if (state.connectionError !== null) {
      el("connection").innerHTML = renderErrorBanner(state.connectionError);
      return;
    }
    const session = state.session;
    if (session !== null) {
      el("session-info").textContent =
        `session ${session.session_id} (model ${session.model}, ` +
        `task ${session.task_id})`;
      el("tables").innerHTML = renderTableList(
        tableListView(session), state.selectedTable);
      const table = session.tables.find(
        (t) => t.name === state.selectedTable);
      el("stats").innerHTML = table !== undefined
        ? renderStatsInspector(statsInspectorView(table)) : "";
      el("vindexes").textContent = session.virtual_indexes
        .map((v) => `${v.name} on ${v.table}(${v.columns.join(",")})`)
        .join("; ");
    }
    if (state.sqlError !== null) {
      el("plan").innerHTML = renderSqlError(state.lastSql ?? "",
                                            state.sqlError);
    } else if (state.currentExplain !== null) {
      el("plan").innerHTML = renderPlanTree(planTreeView(state.currentExplain));
    }
    if (state.lastDiff !== null && state.previousExplain !== null &&
        state.currentExplain !== null) {
      el("whatif").innerHTML = renderWhatifPanel(whatifPanelView(
        state.previousExplain, state.currentExplain, state.lastDiff));
    }
  };

  const run = (work: () => Promise<unknown>) => {
    work().catch(() => undefined).finally(render);
  };

  el<HTMLButtonElement>("connect-btn").addEventListener("click", () => {
    const baseUrl = el<HTMLInputElement>("facade-url").value.trim();
    const model = el<HTMLInputElement>("model-name").value.trim()
      || "independence";
    const file = el<HTMLInputElement>("metadata-file").files?.[0];
    if (file === undefined) return;
    console_ = new Console(new FacadeClient(baseUrl));
    run(async () => {
      const metadata = JSON.parse(await file.text());
      await console_!.connect(metadata, model);
    });
  });

  el("tables").addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLElement>("[data-table]");
    if (row !== null && console_ !== null) {
      console_.selectTable(row.dataset.table ?? "");
      render();
    }
  });

  el("plan").addEventListener("click", (event) => {
    const node = (event.target as HTMLElement)
      .closest<HTMLElement>(".plan-node");
    const detail = node?.querySelector<HTMLElement>(".node-detail");
    if (detail != null) detail.hidden = !detail.hidden;
  });

  el<HTMLButtonElement>("explain-btn").addEventListener("click", () => {
    if (console_ === null) return;
    const sql = el<HTMLTextAreaElement>("sql-input").value;
    run(() => console_!.runExplain(sql));
  });

  el<HTMLButtonElement>("add-vindex-btn").addEventListener("click", () => {
    if (console_ === null) return;
    const table = el<HTMLInputElement>("vindex-table").value.trim();
    const columns = el<HTMLInputElement>("vindex-columns").value
      .split(",").map((c) => c.trim()).filter((c) => c.length > 0);
    run(async () => {
      await console_!.addVirtualIndex(table, columns);
      await console_!.reattach(console_!.state.session!.session_id);
    });
  });

  el<HTMLButtonElement>("drop-vindex-btn").addEventListener("click", () => {
    if (console_ === null) return;
    const name = el<HTMLInputElement>("vindex-name").value.trim();
    run(async () => {
      await console_!.dropVirtualIndex(name);
      await console_!.reattach(console_!.state.session!.session_id);
    });
  });
}

document.addEventListener("DOMContentLoaded", mount);
