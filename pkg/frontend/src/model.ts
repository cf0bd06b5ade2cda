/**
 * Framework-free state of the debugger client: the rule tree with effective
 * logging states (optimistic commands, reverted on nack), the sortable log
 * table with per-term render classes, and the connection banner.  The DOM
 * layer renders from these models and nothing else, which is what the test
 * suite drives.
 */

import {
  AckMsg,
  Command,
  cycleState,
  LoggingState,
  LogMsg,
  parseMessage,
  ServerMessage,
  StateMsg,
  Target,
  TreeMsg,
  TreeModule,
  TreeRule,
} from "./protocol.js";

export interface ClientRuleNode {
  id: number;
  label: string;
  module: string;
  file: string;
  line: number;
  col: number;
  state: LoggingState;
  children: ClientRuleNode[];
}

export interface ClientModule {
  name: string;
  file: string;
  source: string | null;
  rules: ClientRuleNode[];
}

export class RuleTreeModel {
  modules: ClientModule[] = [];
  byId = new Map<number, ClientRuleNode>();

  load(tree: TreeMsg): void {
    this.modules = [];
    this.byId.clear();
    const build = (m: TreeModule, r: TreeRule): ClientRuleNode => {
      const node: ClientRuleNode = {
        id: r.id,
        label: r.label,
        module: m.name,
        file: m.file,
        line: r.line,
        col: r.col,
        state: "NEVER",
        children: r.children.map((c) => build(m, c)),
      };
      this.byId.set(node.id, node);
      return node;
    };
    for (const m of tree.modules) {
      this.modules.push({
        name: m.name,
        file: m.file,
        source: m.source ?? null,
        rules: m.rules.map((r) => build(m, r)),
      });
    }
  }

  applyStates(states: Record<string, LoggingState>): void {
    for (const [key, state] of Object.entries(states)) {
      const node = this.byId.get(Number(key));
      if (node) node.state = state;
    }
  }

  subtreeIds(id: number): number[] {
    const root = this.byId.get(id);
    if (!root) return [];
    const out: number[] = [];
    const walk = (n: ClientRuleNode) => {
      out.push(n.id);
      n.children.forEach(walk);
    };
    walk(root);
    return out;
  }

  moduleRuleIds(name: string): number[] {
    const mod = this.modules.find((m) => m.name === name);
    if (!mod) return [];
    const out: number[] = [];
    const walk = (n: ClientRuleNode) => {
      out.push(n.id);
      n.children.forEach(walk);
    };
    mod.rules.forEach(walk);
    return out;
  }

  /** Shared state of a module's rules, or null when mixed/empty. */
  moduleState(name: string): LoggingState | null {
    const ids = this.moduleRuleIds(name);
    if (ids.length === 0) return null;
    const states = new Set(ids.map((id) => this.byId.get(id)!.state));
    return states.size === 1 ? [...states][0] : null;
  }
}

export interface LogRow {
  t: number;
  rule: number;
  label: string;
  final: boolean;
  labelClass: "final-true" | "final-false";
  terms: { src: string; value: string; cssClass: "term-true" | "term-false" | "term-skipped" }[];
}

export type SortKey = "t" | "label";

export class LogTableModel {
  rows: LogRow[] = [];
  errorCount = 0;
  dropCount = 0;
  sortKey: SortKey = "t";
  sortAsc = true;

  ingest(msg: LogMsg): LogRow {
    const row: LogRow = {
      t: msg.t,
      rule: msg.rule,
      label: msg.label,
      final: msg.final,
      labelClass: msg.final ? "final-true" : "final-false",
      terms: msg.terms.map((term) => ({
        src: term.src,
        value: term.v,
        cssClass:
          term.v === "skipped" ? "term-skipped" : term.v === "true" ? "term-true" : "term-false",
      })),
    };
    this.rows.push(row);
    return row;
  }

  setSort(key: SortKey): void {
    if (this.sortKey === key) {
      this.sortAsc = !this.sortAsc;
    } else {
      this.sortKey = key;
      this.sortAsc = true;
    }
  }

  /** Rows in the user-chosen order; ingestion order is kept stable. */
  sortedRows(): LogRow[] {
    const rows = [...this.rows];
    const dir = this.sortAsc ? 1 : -1;
    rows.sort((a, b) => {
      if (this.sortKey === "t") return (a.t - b.t) * dir;
      return a.label.localeCompare(b.label) * dir || (a.t - b.t) * dir;
    });
    return rows;
  }

  clear(): void {
    this.rows = [];
  }
}

interface PendingCommand {
  command: Command;
  previous: Map<number, LoggingState>;
}

export type ConnectionStatus = "connecting" | "connected" | "lost";

/**
 * The whole client model: dispatches server messages, applies optimistic
 * state changes and reverts them on nack, and tracks connection status.
 */
export class DebuggerModel {
  tree = new RuleTreeModel();
  table = new LogTableModel();
  status: ConnectionStatus = "connecting";
  hasTree = false;
  private seq = 0;
  private pending = new Map<number, PendingCommand>();
  selected: ClientRuleNode | null = null;

  /** Feed one raw line; returns the parsed message or null (counted). */
  receiveLine(line: string): ServerMessage | null {
    const msg = parseMessage(line);
    if (msg === null) {
      if (line.trim() !== "") this.table.errorCount += 1;
      return null;
    }
    this.receive(msg);
    return msg;
  }

  receive(msg: ServerMessage): void {
    switch (msg.kind) {
      case "tree":
        this.tree.load(msg);
        this.hasTree = true;
        break;
      case "state":
        this.applyState(msg);
        break;
      case "log":
        this.table.ingest(msg);
        break;
      case "ack":
        this.handleAck(msg);
        break;
      case "drops":
        this.table.dropCount += msg.count;
        break;
    }
  }

  private applyState(msg: StateMsg): void {
    // the server's state map always wins over optimistic guesses
    this.tree.applyStates(msg.states);
  }

  private handleAck(msg: AckMsg): void {
    if (msg.seq === null) return;
    const pending = this.pending.get(msg.seq);
    if (!pending) return;
    this.pending.delete(msg.seq);
    if (!msg.ok) {
      for (const [id, state] of pending.previous) {
        const node = this.tree.byId.get(id);
        if (node) node.state = state;
      }
    }
  }

  /**
   * Cycle a rule checkbox (or a whole module/subtree): applies the next
   * state optimistically and returns the command to send.
   */
  cycle(target: Target): Command | null {
    let ids: number[];
    let current: LoggingState;
    if ("rule" in target) {
      const node = this.tree.byId.get(target.rule);
      if (!node) return null;
      ids = [target.rule];
      current = node.state;
    } else if ("subtree" in target) {
      ids = this.tree.subtreeIds(target.subtree);
      if (ids.length === 0) return null;
      current = this.tree.byId.get(target.subtree)!.state;
    } else {
      ids = this.tree.moduleRuleIds(target.module);
      if (ids.length === 0) return null;
      current = this.tree.moduleState(target.module) ?? "NEVER";
    }
    const next = cycleState(current);
    return this.setState(target, next, ids);
  }

  setState(target: Target, state: LoggingState, ids?: number[]): Command {
    if (!ids) {
      ids =
        "rule" in target
          ? [target.rule]
          : "subtree" in target
            ? this.tree.subtreeIds(target.subtree)
            : this.tree.moduleRuleIds(target.module);
    }
    const previous = new Map<number, LoggingState>();
    for (const id of ids) {
      const node = this.tree.byId.get(id);
      if (node) {
        previous.set(id, node.state);
        node.state = state; // optimistic; nack reverts, state msg confirms
      }
    }
    this.seq += 1;
    const command: Command = { kind: "set-state", seq: this.seq, target, state };
    this.pending.set(this.seq, { command, previous });
    return command;
  }

  configCommand(kind: "save-config" | "load-config", path: string): Command {
    this.seq += 1;
    return { kind, seq: this.seq, path };
  }

  select(id: number): ClientRuleNode | null {
    this.selected = this.tree.byId.get(id) ?? null;
    return this.selected;
  }

  /** Source lines around the selected rule, for the read-only snippet panel. */
  sourceSnippet(context = 3): { file: string; startLine: number; lines: string[]; focus: number } | null {
    const node = this.selected;
    if (!node) return null;
    const mod = this.tree.modules.find((m) => m.name === node.module);
    if (!mod || mod.source === null) {
      return { file: node.file, startLine: node.line, lines: [], focus: node.line };
    }
    const all = mod.source.split("\n");
    const start = Math.max(1, node.line - context);
    const end = Math.min(all.length, node.line + context);
    return {
      file: node.file,
      startLine: start,
      lines: all.slice(start - 1, end),
      focus: node.line,
    };
  }
}
