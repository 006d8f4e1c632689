import {
  ClientMessage,
  ServerMessage,
  parseServerMessage,
  serializeClientMessage,
} from "./protocol.js";

/**
 * One duplex message pipe to the trial service. The session controller
 * only ever talks to this interface, so swapping a browser WebSocket for
 * a raw TCP socket (tests) or an in-memory mock changes nothing above it.
 */
export interface Transport {
  send(msg: ClientMessage): void;
  onMessage(handler: (msg: ServerMessage) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

/** Browser transport: one WebSocket text frame per protocol message. */
export class WebSocketTransport implements Transport {
  private ws: WebSocket;
  private messageHandler: ((msg: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;
  private queue: ClientMessage[] = [];

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => {
      for (const msg of this.queue.splice(0)) this.send(msg);
    };
    this.ws.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data !== "string" || !this.messageHandler) return;
      this.messageHandler(parseServerMessage(ev.data));
    };
    this.ws.onclose = () => this.closeHandler?.();
    this.ws.onerror = () => this.closeHandler?.();
  }

  send(msg: ClientMessage): void {
    if (this.ws.readyState === WebSocket.CONNECTING) {
      this.queue.push(msg);
      return;
    }
    if (this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(serializeClientMessage(msg));
    }
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.ws.close();
  }
}
