// Session driver: owns the state log and talks to the server through a
// minimal transport, so it runs against a real WebSocket or a scripted one.

import type { ClientMessage, Point, ServerMessage } from "./protocol.js";
import { AppEvent, initialState, reduce, RoundState } from "./state.js";

export interface Transport {
  send(msg: ClientMessage): void;
  onMessage(handler: (msg: ServerMessage) => void): void;
  onOpen(handler: () => void): void;
  onClose(handler: () => void): void;
}

export class GameClient {
  state: RoundState = initialState;
  readonly log: AppEvent[] = [];
  private listeners: Array<(s: RoundState) => void> = [];

  constructor(private transport: Transport) {
    transport.onOpen(() => this.apply({ type: "connection", connected: true }));
    transport.onClose(() => this.apply({ type: "connection", connected: false }));
    transport.onMessage((msg) => this.apply(msg));
  }

  onChange(listener: (s: RoundState) => void): void {
    this.listeners.push(listener);
  }

  private apply(event: AppEvent): void {
    this.log.push(event);
    this.state = reduce(this.state, event);
    for (const l of this.listeners) {
      l(this.state);
    }
  }

  startRound(mode: "guesser" | "sketcher" = "sketcher"): void {
    this.transport.send({ type: "start_round", mode });
  }

  sendStroke(points: Point[]): void {
    if (points.length === 0) {
      return;
    }
    this.transport.send({ type: "stroke", points });
  }

  guess(word: string): void {
    const trimmed = word.trim().toLowerCase();
    if (!trimmed || this.state.phase !== "active") {
      return;
    }
    this.apply({ type: "local_guess", word: trimmed });
    this.transport.send({ type: "guess", word: trimmed });
  }
}

export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  return {
    send: (msg) => ws.send(JSON.stringify(msg)),
    onMessage: (h) => ws.addEventListener("message", (e) => h(JSON.parse(e.data as string))),
    onOpen: (h) => ws.addEventListener("open", h),
    onClose: (h) => ws.addEventListener("close", h),
  };
}
