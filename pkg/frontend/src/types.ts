// Wire types mirroring the gateway API.

export interface PinUpsertEvent {
  type: "pin_upsert";
  pin_id: string;
  topic: number;
  lat: number;
  lon: number;
  member_count: number;
  last_updated: number;
  subscribed: boolean;
}

export interface PinRemovedEvent {
  type: "pin_removed";
  pin_id: string;
  topic: number;
}

export type PinEvent = PinUpsertEvent | PinRemovedEvent;

export interface PinView {
  pin_id: string;
  topic: number;
  color: string;
  lat: number;
  lon: number;
  member_count: number;
  subscribed: boolean;
}

export interface TopicWord {
  word: string;
  weight: number;
}

export interface TopicInfo {
  topic: number;
  words: TopicWord[];
}

export interface CommunityRow {
  topic: number;
  area_id: number;
  core_points: [number, number][];
  member_ids: string[];
  centroid: [number, number];
  radius_km: number;
}
