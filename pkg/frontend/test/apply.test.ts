import { beforeEach, describe, expect, it } from "vitest";

import { applyConfig } from "../src/apply.js";
import { CALLS, PARTIES } from "../src/data.js";
import { renderGraph } from "../src/views/graph.js";
import { DashboardStore } from "../src/store.js";
import type { AdaptationConfig, Envelope } from "../src/types.js";

function partialColor(configId = "c1", color = "#ff6b35"): AdaptationConfig {
  return {
    config_id: configId,
    session_id: "s",
    layout: "graph",
    strategy: { kind: "partial", attribute: "color" },
    operations: [{ target: "node.clique", property: "color", value: color }],
    issued_at_ms: 0,
  };
}

function fullGraph(configId = "cf"): AdaptationConfig {
  return {
    config_id: configId,
    session_id: "s",
    layout: "graph",
    strategy: { kind: "full" },
    operations: [
      { target: "node.clique", property: "color", value: "#ff6b35" },
      { target: "node.clique", property: "shape", value: "diamond" },
      { target: "node.high-degree", property: "size", value: 1.5 },
      { target: "node.clique", property: "proximity", value: 0.6 },
      { target: "edge.clique", property: "thickness", value: 2.5 },
    ],
    issued_at_ms: 0,
  };
}

describe("applyConfig", () => {
  let root: HTMLElement;

  beforeEach(() => {
    root = document.createElement("div");
    renderGraph(root, PARTIES, CALLS);
  });

  it("recolors exactly the targeted nodes, positions untouched", () => {
    const before = new Map(
      [...root.querySelectorAll("[data-kind=node]")].map((n) => [
        n.getAttribute("data-id"),
        n.getAttribute("d"),
      ]),
    );
    const result = applyConfig(root, partialColor());
    expect(result.applied).toBe(1);
    expect(result.skipped).toEqual([]);
    for (const node of root.querySelectorAll("[data-kind=node]")) {
      const isClique = node.getAttribute("data-sel")!.includes("node.clique");
      expect(node.getAttribute("fill") === "#ff6b35").toBe(isClique);
      expect(node.getAttribute("d")).toBe(before.get(node.getAttribute("data-id")));
    }
  });

  it("re-applying the same config is a DOM no-op", () => {
    applyConfig(root, fullGraph());
    const first = root.innerHTML;
    applyConfig(root, fullGraph());
    expect(root.innerHTML).toBe(first);
  });

  it("operations are absolute: later config fully overrides, reapply restores", () => {
    applyConfig(root, partialColor("c1", "#ff6b35"));
    applyConfig(root, partialColor("c2", "#00ff00"));
    const clique = root.querySelector('[data-sel~="node.clique"]')!;
    expect(clique.getAttribute("fill")).toBe("#00ff00");
    applyConfig(root, partialColor("c3", "#ff6b35"));
    expect(clique.getAttribute("fill")).toBe("#ff6b35");
  });

  it("no-adaptation config changes nothing but updates config id", () => {
    const before = root.innerHTML;
    const result = applyConfig(root, {
      config_id: "none-1",
      session_id: "s",
      layout: "graph",
      strategy: { kind: "none" },
      operations: [],
      issued_at_ms: 0,
    });
    expect(result.applied).toBe(0);
    expect(root.innerHTML).toBe(before);
    expect(root.getAttribute("data-config-id")).toBe("none-1");
  });

  it("unknown selector is skipped with a warning, others still apply", () => {
    const config = partialColor();
    config.operations.unshift({ target: "node.ghost", property: "color", value: "#fff" });
    const result = applyConfig(root, config);
    expect(result.applied).toBe(1);
    expect(result.skipped).toHaveLength(1);
    expect(result.skipped[0]).toContain("node.ghost");
  });

  it("size and proximity recompute geometry deterministically", () => {
    const node = root.querySelector('[data-sel~="node.high-degree"]')!;
    const d0 = node.getAttribute("d")!;
    applyConfig(root, {
      config_id: "sz",
      session_id: "s",
      layout: "graph",
      strategy: { kind: "partial", attribute: "size" },
      operations: [{ target: "node.high-degree", property: "size", value: 1.5 }],
      issued_at_ms: 0,
    });
    const d1 = node.getAttribute("d")!;
    expect(d1).not.toBe(d0);
    // absolute semantics: setting size back to 1 restores the original path
    applyConfig(root, {
      config_id: "sz2",
      session_id: "s",
      layout: "graph",
      strategy: { kind: "partial", attribute: "size" },
      operations: [{ target: "node.high-degree", property: "size", value: 1.0 }],
      issued_at_ms: 0,
    });
    expect(node.getAttribute("d")).toBe(d0);
  });
});

describe("DashboardStore ordering", () => {
  function envelope(seq: number, config: AdaptationConfig): Envelope<AdaptationConfig> {
    return { topic: "adaptation.config", seq, timestamp_ms: 0, session_id: "s", payload: config };
  }

  it("applies configs in seq order and discards late lower-seq ones", () => {
    const host = document.createElement("div");
    const warnings: string[] = [];
    const store = new DashboardStore(host, { onWarning: (m) => warnings.push(m) });
    expect(store.receiveConfig(envelope(2, partialColor("newer", "#00ff00")))).toBe(true);
    expect(store.receiveConfig(envelope(1, partialColor("older", "#ff0000")))).toBe(false);
    const clique = store.roots.graph.querySelector('[data-sel~="node.clique"]')!;
    expect(clique.getAttribute("fill")).toBe("#00ff00");
    expect(store.appliedConfigId).toBe("newer");
    expect(warnings.some((w) => w.includes("stale"))).toBe(true);
  });

  it("layout switch emits exactly one event per switch", () => {
    const host = document.createElement("div");
    const events: string[] = [];
    const store = new DashboardStore(host, { onLayoutSwitch: (l) => events.push(l) });
    store.switchLayout("timeline");
    store.switchLayout("timeline"); // no-op: already active
    store.switchLayout("distribution");
    expect(events).toEqual(["timeline", "distribution"]);
    expect(store.roots.timeline.hidden).toBe(true);
    expect(store.roots.distribution.hidden).toBe(false);
  });
});
