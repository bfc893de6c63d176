// Subscription panel logic: optimistic local updates with rollback when
// the gateway rejects the change.

import { GatewayClient } from "./api.js";
import { MarkerStore } from "./state.js";

export class SubscriptionPanel {
  readonly subscribed = new Set<number>();

  constructor(
    private client: GatewayClient,
    private store: MarkerStore,
    private userId: string,
    private onError?: (message: string) => void,
  ) {}

  async subscribe(topic: number): Promise<boolean> {
    this.subscribed.add(topic); // optimistic checkbox
    try {
      await this.client.subscribe(this.userId, [topic]);
      return true;
    } catch (err) {
      this.subscribed.delete(topic); // rollback
      this.onError?.(`could not subscribe to topic ${topic}`);
      return false;
    }
  }

  /** Markers of the topic disappear immediately; the server round-trip
   * follows. A failed round-trip restores the checkbox (markers return
   * with the next pin events). */
  async unsubscribe(topic: number): Promise<boolean> {
    this.subscribed.delete(topic);
    this.store.dropTopic(topic);
    try {
      await this.client.unsubscribe(this.userId, topic);
      return true;
    } catch (err) {
      this.subscribed.add(topic);
      this.onError?.(`could not unsubscribe from topic ${topic}`);
      return false;
    }
  }
}
