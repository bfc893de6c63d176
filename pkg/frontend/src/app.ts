// Browser entry point: wires the marker store, map layer, subscription
// panel, community panel, and the push channel against a gateway URL.

import { GatewayClient } from "./api.js";
import { MarkerLayer, MapHost } from "./map.js";
import { CommunityPanel } from "./panel.js";
import { EventStream, parseEventData, StreamTransport } from "./sse.js";
import { MarkerStore } from "./state.js";
import { SubscriptionPanel } from "./subscriptions.js";

/** EventSource-backed transport (browser runtime). */
const browserTransport: StreamTransport = {
  open(url, onEvent, onOpen) {
    return new Promise((resolve, reject) => {
      const source = new EventSource(url);
      source.onopen = () => onOpen();
      const handle = (raw: MessageEvent) => {
        const event = parseEventData(String(raw.data));
        if (event) {
          onEvent(event);
        }
      };
      source.addEventListener("pin_upsert", handle);
      source.addEventListener("pin_removed", handle);
      source.onerror = () => {
        source.close();
        reject(new Error("event stream dropped"));
      };
    });
  },
};

export interface AppOptions {
  baseUrl: string;
  userId: string;
  host: MapHost;
  onStaleChange?: (stale: boolean) => void;
  onError?: (message: string) => void;
}

export function startApp(opts: AppOptions) {
  const client = new GatewayClient(opts.baseUrl);
  const store = new MarkerStore();
  const panel = new CommunityPanel(client, store);
  const layer = new MarkerLayer(opts.host, store, (pin) => panel.open(pin.pin_id));
  const subs = new SubscriptionPanel(client, store, opts.userId, opts.onError);
  const stream = new EventStream({
    baseUrl: opts.baseUrl,
    userId: opts.userId,
    transport: browserTransport,
    onEvent: (event) => store.apply(event),
    onStaleChange: opts.onStaleChange,
  });
  void stream.run();
  return { client, store, layer, panel, subs, stream };
}
