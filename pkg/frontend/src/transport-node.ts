// Node-only transport speaking the plain TCP line protocol. Used by the
// test suites (and handy for desk debugging); the browser bundle never
// imports this module.
import { Socket, connect } from "node:net";

import {
  ClientMessage,
  ServerMessage,
  parseServerMessage,
  serializeClientMessage,
} from "./protocol.js";
import { Transport } from "./transport.js";

export class TcpLineTransport implements Transport {
  private buffer = "";
  private messageHandler: ((msg: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  private constructor(private socket: Socket) {
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => this.feed(chunk));
    socket.on("close", () => this.closeHandler?.());
    socket.on("error", () => this.closeHandler?.());
  }

  static connect(host: string, port: number): Promise<TcpLineTransport> {
    return new Promise((resolve, reject) => {
      const socket = connect({ host, port }, () =>
        resolve(new TcpLineTransport(socket)),
      );
      socket.once("error", reject);
    });
  }

  private feed(chunk: string): void {
    this.buffer += chunk;
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) return;
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (line && this.messageHandler) {
        this.messageHandler(parseServerMessage(line));
      }
    }
  }

  send(msg: ClientMessage): void {
    this.socket.write(serializeClientMessage(msg) + "\n");
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }
}
