// WebSocket session client: latest-state buffer, reconnect with backoff.

import { parseServerMessage, ServerMessage, StateMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface ClientHandlers {
  onStatus?(status: ConnectionStatus): void;
  onMessage?(message: ServerMessage): void;
}

export class SessionClient {
  latestState: StateMessage | null = null;
  status: ConnectionStatus = "connecting";
  private ws: WebSocket | null = null;
  private retryMs = 500;
  private closedByUser = false;

  constructor(private url: string, private handlers: ClientHandlers = {}) {}

  connect(): void {
    this.closedByUser = false;
    this.setStatus("connecting");
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.retryMs = 500;
      this.setStatus("open");
    };
    this.ws.onmessage = (event) => {
      const message = parseServerMessage(String(event.data));
      if (message === null) return;
      if (message.type === "state") this.latestState = message;
      this.handlers.onMessage?.(message);
    };
    this.ws.onclose = () => {
      this.setStatus("closed");
      if (!this.closedByUser) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
    this.ws.onerror = () => this.ws?.close();
  }

  send(payload: string): boolean {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(payload);
      return true;
    }
    return false;
  }

  close(): void {
    this.closedByUser = true;
    this.ws?.close();
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.handlers.onStatus?.(status);
  }
}
