/**
 * DOM rendering over the models: the rule tree with multi-state checkboxes,
 * the sortable log table (labels and base terms colored by outcome, skipped
 * terms greyed), the connection banner and the source snippet panel.
 * Updates are batched per animation frame to survive log bursts.
 */

import { ClientModule, ClientRuleNode, DebuggerModel, SortKey } from "./model.js";
import { LoggingState, Target } from "./protocol.js";

const STATE_GLYPHS: Record<LoggingState, string> = {
  NEVER: "○", // ○
  ALWAYS: "●", // ●
  IF_TRUE: "◐", // ◐
  IF_FALSE: "◑", // ◑
};

export interface ViewCallbacks {
  onCycle: (target: Target) => void;
  onSelect: (ruleId: number) => void;
  onSort: (key: SortKey) => void;
  onSaveConfig: (path: string) => void;
  onLoadConfig: (path: string) => void;
}

export class View {
  private dirty = false;
  private frameRequested = false;

  constructor(
    private root: Document,
    private model: DebuggerModel,
    private callbacks: ViewCallbacks,
  ) {}

  /** Mark the view dirty; the actual render runs once per animation frame. */
  invalidate(): void {
    this.dirty = true;
    if (this.frameRequested) return;
    this.frameRequested = true;
    requestAnimationFrame(() => {
      this.frameRequested = false;
      if (this.dirty) {
        this.dirty = false;
        this.render();
      }
    });
  }

  render(): void {
    this.renderBanner();
    this.renderTree();
    this.renderTable();
    this.renderSource();
  }

  private el(id: string): HTMLElement {
    const node = this.root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }

  private renderBanner(): void {
    const banner = this.el("banner");
    banner.dataset.status = this.model.status;
    banner.textContent =
      this.model.status === "connected"
        ? ""
        : this.model.status === "connecting"
          ? "connecting…"
          : "connection lost, retrying…";
    const counters = this.el("counters");
    counters.textContent =
      `rows ${this.model.table.rows.length}` +
      ` · drops ${this.model.table.dropCount}` +
      ` · errors ${this.model.table.errorCount}`;
  }

  private stateButton(state: LoggingState, target: Target): HTMLElement {
    const btn = this.root.createElement("button");
    btn.className = `tristate state-${state}`;
    btn.textContent = STATE_GLYPHS[state];
    btn.title = `logging: ${state} (click to cycle)`;
    btn.addEventListener("click", (ev) => {
      ev.stopPropagation();
      this.callbacks.onCycle(target);
    });
    return btn;
  }

  private ruleNode(node: ClientRuleNode): HTMLElement {
    const li = this.root.createElement("li");
    li.className = "rule";
    li.dataset.ruleId = String(node.id);
    const row = this.root.createElement("div");
    row.className = "rule-row";
    const target: Target = node.children.length > 0 ? { subtree: node.id } : { rule: node.id };
    row.appendChild(this.stateButton(node.state, target));
    const label = this.root.createElement("span");
    label.className = "rule-label";
    label.textContent = node.label;
    label.addEventListener("click", () => this.callbacks.onSelect(node.id));
    row.appendChild(label);
    li.appendChild(row);
    if (node.children.length > 0) {
      const ul = this.root.createElement("ul");
      for (const child of node.children) ul.appendChild(this.ruleNode(child));
      li.appendChild(ul);
    }
    return li;
  }

  private moduleNode(mod: ClientModule): HTMLElement {
    const li = this.root.createElement("li");
    li.className = "module";
    const row = this.root.createElement("div");
    row.className = "rule-row module-row";
    row.appendChild(this.stateButton(this.model.tree.moduleState(mod.name) ?? "NEVER", { module: mod.name }));
    const label = this.root.createElement("span");
    label.className = "module-label";
    label.textContent = mod.name;
    row.appendChild(label);
    li.appendChild(row);
    const ul = this.root.createElement("ul");
    for (const rule of mod.rules) ul.appendChild(this.ruleNode(rule));
    li.appendChild(ul);
    return li;
  }

  private renderTree(): void {
    const host = this.el("tree");
    host.textContent = "";
    const ul = this.root.createElement("ul");
    ul.className = "tree-root";
    for (const mod of this.model.tree.modules) ul.appendChild(this.moduleNode(mod));
    host.appendChild(ul);
  }

  private renderTable(): void {
    const body = this.el("log-body");
    body.textContent = "";
    for (const row of this.model.table.sortedRows()) {
      const tr = this.root.createElement("tr");
      tr.addEventListener("click", () => this.callbacks.onSelect(row.rule));

      const tdT = this.root.createElement("td");
      tdT.textContent = String(row.t);
      tr.appendChild(tdT);

      const tdLabel = this.root.createElement("td");
      tdLabel.textContent = row.label;
      tdLabel.className = row.labelClass;
      tr.appendChild(tdLabel);

      const tdCond = this.root.createElement("td");
      row.terms.forEach((term, i) => {
        if (i > 0) tdCond.appendChild(this.root.createTextNode(" ∧ "));
        const span = this.root.createElement("span");
        span.className = term.cssClass;
        span.textContent = term.src;
        span.title = term.value;
        tdCond.appendChild(span);
      });
      tr.appendChild(tdCond);
      body.appendChild(tr);
    }
  }

  private renderSource(): void {
    const panel = this.el("source");
    const snippet = this.model.sourceSnippet();
    panel.textContent = "";
    if (!snippet) {
      panel.textContent = "select a rule or log row to see its source";
      return;
    }
    const head = this.root.createElement("div");
    head.className = "source-head";
    head.textContent = `${snippet.file}:${snippet.focus}`;
    panel.appendChild(head);
    const pre = this.root.createElement("pre");
    snippet.lines.forEach((line, i) => {
      const lineNo = snippet.startLine + i;
      const div = this.root.createElement("div");
      div.className = lineNo === snippet.focus ? "source-line focus" : "source-line";
      div.textContent = `${String(lineNo).padStart(4)}  ${line}`;
      pre.appendChild(div);
    });
    panel.appendChild(pre);
  }

  bindChrome(): void {
    this.el("sort-t").addEventListener("click", () => this.callbacks.onSort("t"));
    this.el("sort-label").addEventListener("click", () => this.callbacks.onSort("label"));
    this.el("save-config").addEventListener("click", () => {
      const path = (this.el("config-path") as HTMLInputElement).value || "logging.json";
      this.callbacks.onSaveConfig(path);
    });
    this.el("load-config").addEventListener("click", () => {
      const path = (this.el("config-path") as HTMLInputElement).value || "logging.json";
      this.callbacks.onLoadConfig(path);
    });
  }
}
