/**
 * WebSocket client with reconnect. The server sends one JSON message per
 * text frame; commands go back the same way.
 */

import { UiSessionState } from "./session.js";
import { Command, encodeCommand, parseTelemetry } from "./wire.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface ClientOptions {
  url: string;
  session: UiSessionState;
  socketFactory?: (url: string) => SocketLike;
  reconnectMs?: number;
  onDisconnect?: () => void;
  setTimeoutFn?: typeof setTimeout;
}

export class CockpitClient {
  private readonly options: ClientOptions;
  private socket: SocketLike | null = null;
  private closed = false;

  constructor(options: ClientOptions) {
    this.options = options;
  }

  connect(): void {
    const factory =
      this.options.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const session = this.options.session;
    session.setStatus("connecting");
    const socket = factory(this.options.url);
    this.socket = socket;
    socket.onopen = () => session.setStatus("connected");
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") {
        const msg = parseTelemetry(ev.data);
        if (msg) session.apply(msg);
      }
    };
    const onGone = () => {
      if (session.status !== "disconnected") {
        session.setStatus("disconnected");
        this.options.onDisconnect?.();
        this.scheduleReconnect();
      }
    };
    socket.onclose = onGone;
    socket.onerror = onGone;
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const wait = this.options.reconnectMs ?? 1000;
    const later = this.options.setTimeoutFn ?? setTimeout;
    later(() => {
      if (!this.closed) this.connect();
    }, wait);
  }

  send(cmd: Command): boolean {
    if (this.options.session.status !== "connected" || !this.socket) {
      return false; // intent is only emitted while connected
    }
    try {
      this.socket.send(encodeCommand(cmd));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
