// Two transports speak the same message stream: raw TCP with the 4-byte
// length prefix (node tooling and tests), and WebSocket (browsers; the
// server upgrades automatically when the connection opens with GET).

import {
  LengthPrefixedDecoder,
  encodeLengthPrefixed,
  type ServerMessage,
} from "./protocol.js";

export interface Transport {
  send(message: object): void;
  onMessage(handler: (message: ServerMessage) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

/** Browser-side transport over a WebSocket. */
export class WebSocketTransport implements Transport {
  private socket: WebSocket;
  private messageHandler: ((m: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.onmessage = (event) => {
      if (this.messageHandler && typeof event.data === "string") {
        this.messageHandler(JSON.parse(event.data) as ServerMessage);
      }
    };
    this.socket.onclose = () => this.closeHandler?.();
  }

  ready(): Promise<void> {
    if (this.socket.readyState === WebSocket.OPEN) return Promise.resolve();
    return new Promise((resolve, reject) => {
      this.socket.onopen = () => resolve();
      this.socket.onerror = () => reject(new Error("websocket connect failed"));
    });
  }

  send(message: object): void {
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(message));
    }
  }

  onMessage(handler: (m: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.close();
  }
}

/** Node-side transport over a plain TCP socket (used by the test suite). */
export class TcpTransport implements Transport {
  private socket: import("node:net").Socket;
  private decoder = new LengthPrefixedDecoder();
  private messageHandler: ((m: ServerMessage) => void) | null = null;
  private closeHandler: (() => void) | null = null;

  private constructor(socket: import("node:net").Socket) {
    this.socket = socket;
    socket.on("data", (chunk: Buffer) => {
      for (const message of this.decoder.push(new Uint8Array(chunk))) {
        this.messageHandler?.(message);
      }
    });
    socket.on("close", () => this.closeHandler?.());
    socket.on("error", () => this.closeHandler?.());
  }

  static async connect(host: string, port: number): Promise<TcpTransport> {
    const net = await import("node:net");
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () =>
        resolve(new TcpTransport(socket)),
      );
      socket.once("error", reject);
    });
  }

  send(message: object): void {
    this.socket.write(encodeLengthPrefixed(message));
  }

  onMessage(handler: (m: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.socket.destroy();
  }
}
