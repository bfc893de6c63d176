// Deterministic topic colors; non-subscribed pins render gray.

const PALETTE = [
  "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
  "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324",
];

export const GRAY = "#9e9e9e";

export function topicColor(topic: number, subscribed: boolean): string {
  if (!subscribed) {
    return GRAY;
  }
  return PALETTE[((topic % PALETTE.length) + PALETTE.length) % PALETTE.length];
}
