// Marker layer over a plain DOM container with an equirectangular
// projection. The tile background is a configurable hook (any slippy
// tile provider can be wired in); the layer itself only needs to place,
// move, recolor, and remove markers, and pan to a searched area.

import { MarkerStore } from "./state.js";
import { PinView } from "./types.js";

export interface Viewport {
  centerLat: number;
  centerLon: number;
  /** degrees of longitude spanned by the container width */
  lonSpan: number;
}

export interface MapHost {
  width: number;
  height: number;
  /** upsert a marker dot at pixel coordinates */
  placeMarker(id: string, x: number, y: number, color: string, label: string): void;
  removeMarker(id: string): void;
  clear(): void;
}

export class MarkerLayer {
  private viewport: Viewport = { centerLat: 20, centerLon: 0, lonSpan: 360 };
  private known = new Set<string>();

  constructor(
    private host: MapHost,
    private store: MarkerStore,
    private onSelect?: (pin: PinView) => void,
  ) {
    store.onChange((pins) => this.render(pins));
  }

  project(lat: number, lon: number): { x: number; y: number } {
    const { centerLat, centerLon, lonSpan } = this.viewport;
    const latSpan = (lonSpan * this.host.height) / this.host.width / 2;
    const x = ((lon - centerLon) / lonSpan + 0.5) * this.host.width;
    const y = ((centerLat - lat) / latSpan + 0.5) * this.host.height;
    return { x, y };
  }

  panTo(lat: number, lon: number, lonSpan?: number): void {
    this.viewport = {
      centerLat: lat,
      centerLon: lon,
      lonSpan: lonSpan ?? this.viewport.lonSpan,
    };
    this.render(this.store.all());
  }

  select(pinId: string): void {
    const pin = this.store.get(pinId);
    if (pin && this.onSelect) {
      this.onSelect(pin);
    }
  }

  private render(pins: PinView[]): void {
    const current = new Set(pins.map((p) => p.pin_id));
    for (const id of this.known) {
      if (!current.has(id)) {
        this.host.removeMarker(id);
      }
    }
    for (const pin of pins) {
      const { x, y } = this.project(pin.lat, pin.lon);
      this.host.placeMarker(pin.pin_id, x, y, pin.color,
                            `topic ${pin.topic}: ${pin.member_count} posts`);
    }
    this.known = current;
  }
}
