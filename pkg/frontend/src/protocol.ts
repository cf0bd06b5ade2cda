/**
 * Message types of the debug protocol (version 1) and a tolerant parser:
 * malformed input yields null so the caller can count errors and move on.
 * See docs/protocols.md in the repository root for the field-by-field schema.
 */

export type LoggingState = "ALWAYS" | "NEVER" | "IF_TRUE" | "IF_FALSE";

export const STATES: LoggingState[] = ["NEVER", "ALWAYS", "IF_TRUE", "IF_FALSE"];

/** Checkbox cycle order: NEVER -> ALWAYS -> IF_TRUE -> IF_FALSE -> NEVER. */
export function cycleState(state: LoggingState): LoggingState {
  const i = STATES.indexOf(state);
  return STATES[(i + 1) % STATES.length];
}

export interface TreeRule {
  id: number;
  label: string;
  line: number;
  col: number;
  children: TreeRule[];
}

export interface TreeModule {
  name: string;
  file: string;
  source?: string | null;
  rules: TreeRule[];
}

export interface TreeMsg {
  kind: "tree";
  v: number;
  modules: TreeModule[];
}

export interface StateMsg {
  kind: "state";
  v?: number;
  states: Record<string, LoggingState>;
}

export interface LogTerm {
  i: number;
  src: string;
  v: "true" | "false" | "skipped";
}

export interface LogMsg {
  kind: "log";
  t: number;
  rule: number;
  label: string;
  final: boolean;
  terms: LogTerm[];
}

export interface AckMsg {
  kind: "ack";
  ok: boolean;
  seq: number | null;
  error?: string;
}

export interface DropsMsg {
  kind: "drops";
  count: number;
}

export type ServerMessage = TreeMsg | StateMsg | LogMsg | AckMsg | DropsMsg;

export type Target = { rule: number } | { subtree: number } | { module: string };

export interface SetStateCommand {
  kind: "set-state";
  seq: number;
  target: Target;
  state: LoggingState;
}

export interface ConfigCommand {
  kind: "save-config" | "load-config";
  seq: number;
  path: string;
}

export type Command = SetStateCommand | ConfigCommand | { kind: "ping"; seq: number };

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function isRule(x: unknown): x is TreeRule {
  return (
    isRecord(x) &&
    typeof x.id === "number" &&
    typeof x.label === "string" &&
    Array.isArray(x.children) &&
    x.children.every(isRule)
  );
}

function isLoggingState(x: unknown): x is LoggingState {
  return x === "ALWAYS" || x === "NEVER" || x === "IF_TRUE" || x === "IF_FALSE";
}

function isTerm(x: unknown): x is LogTerm {
  return (
    isRecord(x) &&
    typeof x.i === "number" &&
    typeof x.src === "string" &&
    (x.v === "true" || x.v === "false" || x.v === "skipped")
  );
}

/** Parse one line from the server; null when it is not a valid message. */
export function parseMessage(text: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (!isRecord(data)) return null;
  switch (data.kind) {
    case "tree": {
      if (!Array.isArray(data.modules)) return null;
      for (const m of data.modules) {
        if (!isRecord(m) || typeof m.name !== "string" || !Array.isArray(m.rules)) return null;
        if (!m.rules.every(isRule)) return null;
      }
      return data as unknown as TreeMsg;
    }
    case "state": {
      if (!isRecord(data.states)) return null;
      for (const v of Object.values(data.states)) {
        if (!isLoggingState(v)) return null;
      }
      return data as unknown as StateMsg;
    }
    case "log": {
      if (
        typeof data.t !== "number" ||
        typeof data.rule !== "number" ||
        typeof data.label !== "string" ||
        typeof data.final !== "boolean" ||
        !Array.isArray(data.terms) ||
        !data.terms.every(isTerm)
      ) {
        return null;
      }
      return data as unknown as LogMsg;
    }
    case "ack": {
      if (typeof data.ok !== "boolean") return null;
      return data as unknown as AckMsg;
    }
    case "drops": {
      if (typeof data.count !== "number") return null;
      return data as unknown as DropsMsg;
    }
    default:
      return null;
  }
}

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
