// Marker state as a pure function of the received event log plus local
// subscription actions. Replaying the same log always rebuilds the same
// marker set, which is what the replay tests pin down.

import { topicColor } from "./colors.js";
import { PinEvent, PinView } from "./types.js";

export class MarkerStore {
  private markers = new Map<string, PinView>();
  private listeners: Array<(pins: PinView[]) => void> = [];

  apply(event: PinEvent): void {
    if (event.type === "pin_upsert") {
      this.markers.set(event.pin_id, {
        pin_id: event.pin_id,
        topic: event.topic,
        color: topicColor(event.topic, event.subscribed),
        lat: event.lat,
        lon: event.lon,
        member_count: event.member_count,
        subscribed: event.subscribed,
      });
    } else {
      this.markers.delete(event.pin_id);
    }
    this.emit();
  }

  replay(events: PinEvent[]): void {
    for (const event of events) {
      this.apply(event);
    }
  }

  /** Unsubscribing drops that topic's markers immediately, without
   * waiting for server-side pin_removed events. */
  dropTopic(topic: number): void {
    for (const [id, pin] of this.markers) {
      if (pin.topic === topic) {
        this.markers.delete(id);
      }
    }
    this.emit();
  }

  get(pinId: string): PinView | undefined {
    return this.markers.get(pinId);
  }

  all(): PinView[] {
    return [...this.markers.values()].sort((a, b) =>
      a.pin_id.localeCompare(b.pin_id),
    );
  }

  byTopic(topic: number): PinView[] {
    return this.all().filter((p) => p.topic === topic);
  }

  onChange(listener: (pins: PinView[]) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snapshot = this.all();
    for (const listener of this.listeners) {
      listener(snapshot);
    }
  }
}
