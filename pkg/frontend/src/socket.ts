import type { AdaptationConfig, BehaviorEvent, Envelope } from "./types.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface SocketHooks {
  onConfig: (envelope: Envelope<AdaptationConfig>) => void;
  onState?: (state: ConnectionState) => void;
  onError?: (message: string) => void;
}

/** Minimal WebSocket surface so tests can inject a fake. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

/**
 * Dashboard-side gateway client: receives adaptation-config envelopes and
 * sends behavior frames. Reconnects with doubling backoff; never throws
 * into the render path.
 */
export class DashboardSocket {
  private ws: WsLike | null = null;
  private backoffMs = BACKOFF_START_MS;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  state: ConnectionState = "closed";

  constructor(
    private url: string,
    private hooks: SocketHooks,
    private factory: WsFactory = (u) => new WebSocket(u) as unknown as WsLike,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private setState(state: ConnectionState): void {
    this.state = state;
    this.hooks.onState?.(state);
  }

  private open(): void {
    this.setState("connecting");
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.setState("open");
    };
    ws.onmessage = (ev) => {
      let doc: unknown;
      try {
        doc = JSON.parse(String(ev.data));
      } catch {
        this.hooks.onError?.("unparseable frame from gateway");
        return;
      }
      const frame = doc as Record<string, unknown>;
      if (frame.type === "error") {
        this.hooks.onError?.(String(frame.error));
        return;
      }
      if (frame.topic === "adaptation.config") {
        this.hooks.onConfig(doc as Envelope<AdaptationConfig>);
      }
    };
    ws.onerror = () => {
      // onclose follows; reconnect handled there
    };
    ws.onclose = () => {
      this.setState("closed");
      if (this.stopped) return;
      this.timer = setTimeout(() => this.open(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    };
  }

  /** Send one behavior frame; returns false when the socket is not open. */
  emitBehavior(event: BehaviorEvent): boolean {
    if (this.state !== "open" || this.ws === null) return false;
    this.ws.send(JSON.stringify({ type: "behavior", payload: event }));
    return true;
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.ws?.close();
  }
}
