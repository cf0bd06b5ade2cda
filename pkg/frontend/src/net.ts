/**
 * WebSocket connection to the debug server with automatic retry.  The
 * server sends one JSON message per text frame; commands go out the same
 * way.  On connection loss the owner gets a status callback (banner) and a
 * reconnect attempt is scheduled.
 */

import { Command, encodeCommand } from "./protocol.js";

export interface ConnectionHandlers {
  onLine: (line: string) => void;
  onStatus: (status: "connecting" | "connected" | "lost") => void;
}

export class Connection {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;

  constructor(
    private url: string,
    private handlers: ConnectionHandlers,
  ) {}

  start(): void {
    this.closed = false;
    this.connect();
  }

  private connect(): void {
    this.handlers.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.retryMs = 500;
      this.handlers.onStatus("connected");
    };
    ws.onmessage = (event) => {
      for (const line of String(event.data).split("\n")) {
        if (line.trim() !== "") this.handlers.onLine(line);
      }
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.closed) return;
      this.handlers.onStatus("lost");
      setTimeout(() => {
        if (!this.closed) this.connect();
      }, this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 5000);
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  send(command: Command): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(encodeCommand(command));
    return true;
  }

  stop(): void {
    this.closed = true;
    this.ws?.close();
  }
}

export function defaultUrl(): string {
  const host = location.hostname || "127.0.0.1";
  const port = location.port || "8600";
  return `ws://${host}:${port}/`;
}
