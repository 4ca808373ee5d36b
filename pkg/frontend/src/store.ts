import { applyConfig } from "./apply.js";
import { CALLS, PARTIES } from "./data.js";
import { renderDistribution } from "./views/distribution.js";
import { renderGraph } from "./views/graph.js";
import { renderTimeline } from "./views/timeline.js";
import type { AdaptationConfig, Envelope, Layout } from "./types.js";

export const LAYOUTS: Layout[] = ["graph", "timeline", "distribution"];

export interface StoreHooks {
  onLayoutSwitch?: (layout: Layout) => void;
  onWarning?: (message: string) => void;
}

/**
 * View model: one active layout, per-layout view roots, applied-config
 * bookkeeping. Configs are applied in envelope seq order; a late-arriving
 * lower-seq config is discarded. Configs for non-active layouts are applied
 * to their (hidden) roots so switching layouts shows the current state.
 */
export class DashboardStore {
  activeLayout: Layout = "graph";
  appliedConfigId: string | null = null;
  lastSeq = 0;
  readonly roots: Record<Layout, HTMLElement>;

  constructor(
    host: HTMLElement,
    private hooks: StoreHooks = {},
    public bucketMin = 60,
  ) {
    const doc = host.ownerDocument;
    this.roots = {} as Record<Layout, HTMLElement>;
    for (const layout of LAYOUTS) {
      const root = doc.createElement("section");
      root.setAttribute("data-layout", layout);
      root.hidden = layout !== this.activeLayout;
      host.appendChild(root);
      this.roots[layout] = root;
    }
    this.renderAll();
  }

  renderAll(): void {
    renderGraph(this.roots.graph, PARTIES, CALLS);
    renderTimeline(this.roots.timeline, PARTIES, CALLS);
    renderDistribution(this.roots.distribution, CALLS, this.bucketMin);
  }

  /**
   * Layout change. A user-driven switch emits exactly one behavior event;
   * programmatic sync (initial state fetch) passes silent=true.
   */
  switchLayout(layout: Layout, silent = false): void {
    if (layout === this.activeLayout) return;
    this.activeLayout = layout;
    for (const l of LAYOUTS) {
      this.roots[l].hidden = l !== layout;
    }
    if (!silent) this.hooks.onLayoutSwitch?.(layout);
  }

  /** Apply a config envelope; returns true when it was applied. */
  receiveConfig(envelope: Envelope<AdaptationConfig>): boolean {
    if (envelope.seq <= this.lastSeq) {
      this.hooks.onWarning?.(
        `discarded stale config seq ${envelope.seq} (already at ${this.lastSeq})`,
      );
      return false;
    }
    this.lastSeq = envelope.seq;
    const config = envelope.payload;
    const root = this.roots[config.layout];
    if (root === undefined) {
      this.hooks.onWarning?.(`config for unknown layout ${config.layout}`);
      return false;
    }
    const result = applyConfig(root, config);
    for (const message of result.skipped) {
      this.hooks.onWarning?.(message);
    }
    this.appliedConfigId = config.config_id;
    return true;
  }
}
