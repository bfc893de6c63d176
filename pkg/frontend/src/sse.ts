// Push-channel client: parses the event stream and reconnects with
// exponential backoff, surfacing a stale-data flag while disconnected.
// The transport is injectable so tests can drive it without sockets.

import { PinEvent } from "./types.js";

export interface StreamTransport {
  /** Open a connection; resolves when the connection CLOSES (drop). */
  open(
    url: string,
    onEvent: (event: PinEvent) => void,
    onOpen: () => void,
  ): Promise<void>;
}

export interface EventStreamOptions {
  baseUrl: string;
  userId: string;
  transport: StreamTransport;
  onEvent: (event: PinEvent) => void;
  /** stale=true while the connection is down. */
  onStaleChange?: (stale: boolean) => void;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class EventStream {
  private stopped = false;
  readonly attempts: number[] = []; // backoff delays actually waited

  constructor(private opts: EventStreamOptions) {}

  async run(): Promise<void> {
    const sleep =
      this.opts.sleep ?? ((ms: number) => new Promise((r) => setTimeout(r, ms)));
    let backoff = this.opts.initialBackoffMs ?? 500;
    const maxBackoff = this.opts.maxBackoffMs ?? 30_000;
    const url = `${this.opts.baseUrl}/events?user_id=${encodeURIComponent(this.opts.userId)}`;

    while (!this.stopped) {
      try {
        await this.opts.transport.open(url, this.opts.onEvent, () => {
          backoff = this.opts.initialBackoffMs ?? 500; // healthy: reset
          this.opts.onStaleChange?.(false);
        });
      } catch {
        // connection error: fall through to backoff
      }
      if (this.stopped) {
        return;
      }
      this.opts.onStaleChange?.(true);
      this.attempts.push(backoff);
      await sleep(backoff);
      backoff = Math.min(backoff * 2, maxBackoff);
    }
  }

  stop(): void {
    this.stopped = true;
  }
}

/** Parse one SSE frame body (the `data:` payload) into a pin event. */
export function parseEventData(data: string): PinEvent | null {
  try {
    const obj = JSON.parse(data);
    if (obj.type === "pin_upsert" || obj.type === "pin_removed") {
      return obj as PinEvent;
    }
  } catch {
    // ignore malformed frames
  }
  return null;
}
