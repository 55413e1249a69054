/**
 * canvox service client: message framing, ordering, and validation.
 *
 * Frames arrive as a JSON header followed by one binary PNG message; the
 * client pairs them up and never surfaces an out-of-order frame (stale
 * sequence numbers are dropped). Every outbound message is checked against
 * the wire schema before sending, so a buggy UI cannot corrupt a session.
 */

import {
  Brush,
  Inbound,
  Outbound,
  Room,
  inbound,
  outbound,
} from "./protocol.js";

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
};

export interface ClientEvents {
  hello?: (config: Record<string, unknown>, rooms: Room[]) => void;
  frame?: (seq: number, png: Uint8Array) => void;
  stats?: (stats: Record<string, number>) => void;
  error?: (code: number, msg: string) => void;
  open?: () => void;
  close?: () => void;
  /** an inbound frame arrived with seq <= the last shown one */
  reordered?: (seq: number, last: number) => void;
}

export class CanvoxClient {
  readonly url: string;
  rooms: Room[] = [];
  config: Record<string, unknown> | null = null;
  lastShownSeq = 0;
  sentSamples = 0;
  reorderCount = 0;
  private ws: WebSocketLike | null = null;
  private pendingSeq: number | null = null;
  private events: ClientEvents;

  constructor(url: string, events: ClientEvents = {},
              private wsFactory?: (url: string) => WebSocketLike) {
    this.url = url;
    this.events = events;
  }

  connect(): void {
    const make =
      this.wsFactory ??
      ((u: string) => new (globalThis as any).WebSocket(u) as WebSocketLike);
    const ws = make(this.url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => this.events.open?.();
    ws.onclose = () => this.events.close?.();
    ws.onmessage = (ev) => this.handleMessage(ev.data);
    this.ws = ws;
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }

  send(msg: Outbound): void {
    const checked = outbound.parse(msg); // throws on schema violation
    if (!this.ws) throw new Error("not connected");
    if (checked.type === "stroke_sample") this.sentSamples += 1;
    this.ws.send(JSON.stringify(checked));
  }

  setBrush(brush: Brush): void {
    this.send({ type: "set_brush", brush });
  }

  teleport(room: string): void {
    this.send({ type: "teleport", room });
  }

  private handleMessage(data: unknown): void {
    if (typeof data !== "string") {
      const bytes =
        data instanceof ArrayBuffer
          ? new Uint8Array(data)
          : new Uint8Array(data as ArrayBufferLike);
      if (this.pendingSeq === null) return; // stray binary, drop
      const seq = this.pendingSeq;
      this.pendingSeq = null;
      if (seq <= this.lastShownSeq) {
        this.reorderCount += 1;
        this.events.reordered?.(seq, this.lastShownSeq);
        return; // never render out-of-order frames
      }
      this.lastShownSeq = seq;
      this.events.frame?.(seq, bytes);
      return;
    }
    let msg: Inbound;
    try {
      msg = inbound.parse(JSON.parse(data));
    } catch {
      return; // unknown/invalid server message: ignore defensively
    }
    switch (msg.type) {
      case "hello":
        this.config = msg.config;
        this.rooms = msg.rooms;
        this.events.hello?.(msg.config, msg.rooms);
        break;
      case "frame":
        this.pendingSeq = msg.seq;
        break;
      case "stats":
        this.events.stats?.(msg as unknown as Record<string, number>);
        break;
      case "error":
        this.events.error?.(msg.code, msg.msg);
        break;
    }
  }
}
