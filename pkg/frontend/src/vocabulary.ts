import type { Layout } from "./types.js";

/**
 * Selector vocabulary shared with the adaptation catalogue.
 *
 * Must stay identical to the backend's
 * `src/neuroloop/data/selector_vocabulary.json`; a test compares the two so
 * catalogue targets can be validated on either side without running the
 * other.
 */
export const SELECTOR_VOCABULARY: Record<
  Layout,
  { targets: string[]; properties: Record<string, string> }
> = {
  graph: {
    targets: ["node.all", "node.clique", "node.high-degree", "edge.all", "edge.clique"],
    properties: {
      color: "color",
      shape: "shape",
      size: "size",
      proximity: "proximity",
      thickness: "thickness",
    },
  },
  timeline: {
    targets: ["track.all", "track.active-party", "marker.call", "marker.long-call"],
    properties: {
      color: "color",
      shape: "shape",
      size: "size",
      proximity: "proximity",
      thickness: "thickness",
    },
  },
  distribution: {
    targets: ["bar.all", "bar.peak", "bar.offpeak"],
    properties: {
      color: "color",
      shape: "shape",
      size: "size",
      proximity: "proximity",
      thickness: "thickness",
    },
  },
};

export function knownTargets(layout: Layout): Set<string> {
  return new Set(SELECTOR_VOCABULARY[layout].targets);
}
