// Community inspection panel: selecting a pin shows its topic's top
// words (a weighted tag list) and the community details; a pin that
// expired while open turns into an "expired" notice.

import { GatewayClient } from "./api.js";
import { MarkerStore } from "./state.js";
import { CommunityRow, TopicWord } from "./types.js";

export interface PanelView {
  state: "open" | "expired" | "empty";
  pinId?: string;
  topic?: number;
  words?: TopicWord[];
  memberCount?: number;
  memberIds?: string[];
}

export class CommunityPanel {
  view: PanelView = { state: "empty" };

  constructor(
    private client: GatewayClient,
    private store: MarkerStore,
  ) {
    store.onChange(() => this.refresh());
  }

  async open(pinId: string): Promise<PanelView> {
    const pin = this.store.get(pinId);
    if (!pin) {
      this.view = { state: "expired", pinId };
      return this.view;
    }
    const topics = await this.client.topics();
    const info = topics.find((t) => t.topic === pin.topic);
    const communities = await this.client.communities(pin.topic);
    const match = this.closest(communities, pin.lat, pin.lon);
    this.view = {
      state: "open",
      pinId,
      topic: pin.topic,
      words: info?.words ?? [],
      memberCount: pin.member_count,
      memberIds: match?.member_ids ?? [],
    };
    return this.view;
  }

  /** Weighted tag list for the word-cloud style rendering. */
  tagList(): Array<{ word: string; size: number }> {
    if (this.view.state !== "open" || !this.view.words?.length) {
      return [];
    }
    const max = Math.max(...this.view.words.map((w) => w.weight));
    return this.view.words.map((w) => ({
      word: w.word,
      size: max > 0 ? Math.max(1, Math.round((w.weight / max) * 5)) : 1,
    }));
  }

  private refresh(): void {
    if (this.view.state === "open" && this.view.pinId &&
        !this.store.get(this.view.pinId)) {
      this.view = { state: "expired", pinId: this.view.pinId };
    }
  }

  private closest(rows: CommunityRow[], lat: number, lon: number): CommunityRow | null {
    let best: CommunityRow | null = null;
    let bestDist = Infinity;
    for (const row of rows) {
      const d = (row.centroid[0] - lat) ** 2 + (row.centroid[1] - lon) ** 2;
      if (d < bestDist) {
        best = row;
        bestDist = d;
      }
    }
    return best;
  }
}
