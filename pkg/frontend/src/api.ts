// Thin fetch wrappers over the gateway HTTP API.

import { CommunityRow, TopicInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async subscribe(
    userId: string,
    topics: number[],
    bbox?: [[number, number], [number, number]],
  ): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}/subscriptions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ user_id: userId, topics, bbox: bbox ?? null }),
    });
    if (!resp.ok) {
      throw new Error(`subscribe failed: ${resp.status}`);
    }
  }

  async unsubscribe(userId: string, topic: number): Promise<void> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/subscriptions/${encodeURIComponent(userId)}/${topic}`,
      { method: "DELETE" },
    );
    if (!resp.ok) {
      throw new Error(`unsubscribe failed: ${resp.status}`);
    }
  }

  async topics(): Promise<TopicInfo[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/topics`);
    if (!resp.ok) {
      throw new Error(`topics failed: ${resp.status}`);
    }
    const body = (await resp.json()) as { topics: TopicInfo[] };
    return body.topics;
  }

  async communities(topic: number): Promise<CommunityRow[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/communities?topic=${topic}`);
    if (!resp.ok) {
      throw new Error(`communities failed: ${resp.status}`);
    }
    return (await resp.json()) as CommunityRow[];
  }
}
