import type { AdaptationConfig } from "./types.js";

/**
 * Applies adaptation configs to a rendered view.
 *
 * Every operation is an absolute assignment: the adapted state is written
 * into `data-adapt-*` attributes and geometry is recomputed from immutable
 * `data-*` base values, so re-applying the same config is a no-op and a
 * different config fully overrides the previous one (no deltas anywhere).
 */

export interface ApplyResult {
  applied: number;
  skipped: string[];
}

function num(el: Element, name: string, fallback = 0): number {
  const raw = el.getAttribute(name);
  return raw === null ? fallback : parseFloat(raw);
}

function shapePath(shape: string, cx: number, cy: number, r: number): string {
  switch (shape) {
    case "diamond":
      return `M ${cx} ${cy - r} L ${cx + r} ${cy} L ${cx} ${cy + r} L ${cx - r} ${cy} Z`;
    case "square":
      return `M ${cx - r} ${cy - r} H ${cx + r} V ${cy + r} H ${cx - r} Z`;
    default: // circle
      return (
        `M ${cx - r} ${cy} ` +
        `a ${r} ${r} 0 1 0 ${2 * r} 0 ` +
        `a ${r} ${r} 0 1 0 ${-2 * r} 0`
      );
  }
}

/** Recompute geometry of one element from base + adapted state. */
export function refreshGeometry(el: Element): void {
  const kind = el.getAttribute("data-kind");
  const scale = num(el, "data-adapt-size", 1);
  const prox = num(el, "data-adapt-prox", 0);
  const dx = num(el, "data-prox-dx") * prox;
  const dy = num(el, "data-prox-dy") * prox;
  if (kind === "node" || kind === "marker") {
    const cx = num(el, "data-cx") + dx;
    const cy = num(el, "data-cy") + dy;
    const r = num(el, "data-r") * scale;
    const shape = el.getAttribute("data-adapt-shape") ?? el.getAttribute("data-shape") ?? "circle";
    el.setAttribute("d", shapePath(shape, cx, cy, r));
  } else if (kind === "bar") {
    const baseW = num(el, "data-w");
    const baseH = num(el, "data-h");
    const baseX = num(el, "data-x");
    const baseY = num(el, "data-y");
    const w = baseW * scale;
    el.setAttribute("x", String(baseX + (baseW - w) / 2 + dx));
    el.setAttribute("y", String(baseY - baseH * (scale - 1) + dy));
    el.setAttribute("width", String(w));
    el.setAttribute("height", String(baseH * scale));
  } else if (kind === "track" || kind === "edge") {
    el.setAttribute("transform", dx || dy ? `translate(${dx} ${dy})` : "");
  }
}

function applyOperation(el: Element, property: string, value: string | number | boolean): boolean {
  switch (property) {
    case "color": {
      const paint = el.getAttribute("data-paint") ?? "fill";
      el.setAttribute(paint, String(value));
      return true;
    }
    case "thickness":
      el.setAttribute("stroke-width", String(value));
      return true;
    case "size":
      el.setAttribute("data-adapt-size", String(value));
      refreshGeometry(el);
      return true;
    case "proximity":
      el.setAttribute("data-adapt-prox", String(value));
      refreshGeometry(el);
      return true;
    case "shape":
      el.setAttribute("data-adapt-shape", String(value));
      if (el.getAttribute("data-kind") === "bar") {
        el.setAttribute("class", value === "hatched" ? "bar hatched" : "bar");
      } else {
        refreshGeometry(el);
      }
      return true;
    default:
      return false;
  }
}

/**
 * Apply one config to the view rooted at `root`.
 *
 * Unknown selectors and unknown properties never throw; the operation is
 * skipped and reported so the dev console can surface it.
 */
export function applyConfig(root: Element, config: AdaptationConfig): ApplyResult {
  let applied = 0;
  const skipped: string[] = [];
  for (const op of config.operations) {
    const matches = root.querySelectorAll(`[data-sel~="${op.target}"]`);
    if (matches.length === 0) {
      skipped.push(`unknown selector ${op.target} (${op.property})`);
      continue;
    }
    let ok = false;
    for (const el of matches) {
      ok = applyOperation(el, op.property, op.value) || ok;
    }
    if (ok) {
      applied += 1;
    } else {
      skipped.push(`unknown property ${op.property} on ${op.target}`);
    }
  }
  root.setAttribute("data-config-id", config.config_id);
  return { applied, skipped };
}
