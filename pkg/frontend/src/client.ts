import type { ClientEnvelope, ServerEnvelope } from "./protocol.js";
import { parseServerEnvelope } from "./protocol.js";
import type { ViewState } from "./state.js";
import { applyEnvelope, initialViewState } from "./state.js";

// Minimal constructor surface so the session works with both the browser
// WebSocket and the "ws" package in tests.
export type SocketLike = {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open", handler: () => void): void;
  addEventListener(type: "close", handler: () => void): void;
  addEventListener(type: "message", handler: (event: { data: unknown }) => void): void;
};

export type SocketFactory = (url: string) => SocketLike;

export class RoomSession {
  state: ViewState = initialViewState;
  readonly log: ServerEnvelope[] = [];

  private socket: SocketLike | null = null;
  private nextId = 0;
  private listeners: Array<(state: ViewState) => void> = [];
  private roomId: string | null = null;

  constructor(private readonly connectSocket: SocketFactory) {}

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private feed(env: ServerEnvelope): void {
    this.log.push(env);
    this.state = applyEnvelope(this.state, env);
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  connect(address: string, roomId: string, displayName: string): void {
    const url = address.startsWith("ws") ? address : `ws://${address}`;
    this.roomId = roomId;
    this.feed({ type: "connection", status: "connecting" });
    const socket = this.connectSocket(url);
    this.socket = socket;
    socket.addEventListener("open", () => {
      this.feed({ type: "connection", status: "open" });
      this.send("join", { display_name: displayName });
    });
    socket.addEventListener("close", () => {
      this.socket = null;
      this.feed({ type: "connection", status: "closed" });
    });
    socket.addEventListener("message", (event) => {
      this.feed(parseServerEnvelope(String(event.data)));
    });
  }

  close(): void {
    this.socket?.close();
  }

  private send(type: ClientEnvelope["type"], payload?: Record<string, unknown>): boolean {
    if (this.socket === null || this.roomId === null) {
      return false;
    }
    this.nextId += 1;
    const envelope: ClientEnvelope = { id: `c${this.nextId}`, type, room_id: this.roomId };
    if (payload) {
      envelope.payload = payload;
    }
    this.socket.send(JSON.stringify(envelope));
    return true;
  }

  // Action senders validate input locally; nothing malformed goes on the
  // wire and nothing is rendered until the server answers.

  speak(text: string): boolean {
    if (text.trim() === "") {
      return false;
    }
    return this.send("speak", { text });
  }

  withdraw(messageId: string): boolean {
    if (messageId === "") {
      return false;
    }
    return this.send("withdraw", { message_id: messageId });
  }

  issueTask(description: string): boolean {
    if (description.trim() === "") {
      return false;
    }
    return this.send("issue_task", { description });
  }

  vote(candidate: string): boolean {
    if (candidate === "") {
      return false;
    }
    return this.send("vote", { candidate });
  }
}
