import { callCounts } from "../data.js";
import type { CallRecord, Party } from "../types.js";
import { refreshGeometry } from "../apply.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 720;
const HEIGHT = 480;
const HIGH_DEGREE_MIN = 5;

interface NodePos {
  x: number;
  y: number;
}

/**
 * Deterministic force layout: nodes start on a circle (ordered by id) and
 * relax under spring forces on edges plus pairwise repulsion for a fixed
 * number of iterations. No randomness, so two renders are identical.
 */
export function layoutPositions(parties: Party[], calls: CallRecord[]): Map<string, NodePos> {
  const ids = parties.map((p) => p.id);
  const index = new Map(ids.map((id, i) => [id, i]));
  const n = ids.length;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const angle = (2 * Math.PI * i) / n;
    xs[i] = WIDTH / 2 + 170 * Math.cos(angle);
    ys[i] = HEIGHT / 2 + 170 * Math.sin(angle);
  }
  const edges: Array<[number, number]> = [];
  const seen = new Set<string>();
  for (const call of calls) {
    const a = index.get(call.from);
    const b = index.get(call.to);
    if (a === undefined || b === undefined || a === b) continue;
    const key = a < b ? `${a}-${b}` : `${b}-${a}`;
    if (!seen.has(key)) {
      seen.add(key);
      edges.push(a < b ? [a, b] : [b, a]);
    }
  }
  const spring = 90;
  for (let iter = 0; iter < 150; iter++) {
    const fx = new Float64Array(n);
    const fy = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        const dx = xs[i] - xs[j];
        const dy = ys[i] - ys[j];
        const d2 = Math.max(dx * dx + dy * dy, 25);
        const f = 5200 / d2;
        const d = Math.sqrt(d2);
        fx[i] += (f * dx) / d;
        fy[i] += (f * dy) / d;
        fx[j] -= (f * dx) / d;
        fy[j] -= (f * dy) / d;
      }
    }
    for (const [a, b] of edges) {
      const dx = xs[b] - xs[a];
      const dy = ys[b] - ys[a];
      const d = Math.max(Math.sqrt(dx * dx + dy * dy), 1);
      const f = 0.02 * (d - spring);
      fx[a] += (f * dx) / d;
      fy[a] += (f * dy) / d;
      fx[b] -= (f * dx) / d;
      fy[b] -= (f * dy) / d;
    }
    const step = 0.85 * (1 - iter / 160);
    for (let i = 0; i < n; i++) {
      xs[i] = Math.min(WIDTH - 40, Math.max(40, xs[i] + step * fx[i]));
      ys[i] = Math.min(HEIGHT - 40, Math.max(40, ys[i] + step * fy[i]));
    }
  }
  const out = new Map<string, NodePos>();
  ids.forEach((id, i) => out.set(id, { x: Math.round(xs[i] * 100) / 100, y: Math.round(ys[i] * 100) / 100 }));
  return out;
}

export function renderGraph(
  container: Element,
  parties: Party[],
  calls: CallRecord[],
): void {
  const doc = container.ownerDocument!;
  container.innerHTML = "";
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("data-view", "graph");
  const positions = layoutPositions(parties, calls);
  const degrees = callCounts(calls);
  const cliqueIds = new Set(parties.filter((p) => p.clique).map((p) => p.id));
  const cliqueCenter = { x: 0, y: 0 };
  for (const id of cliqueIds) {
    cliqueCenter.x += positions.get(id)!.x / cliqueIds.size;
    cliqueCenter.y += positions.get(id)!.y / cliqueIds.size;
  }

  const seen = new Set<string>();
  for (const call of calls) {
    const key = call.from < call.to ? `${call.from}|${call.to}` : `${call.to}|${call.from}`;
    if (seen.has(key)) continue;
    seen.add(key);
    const a = positions.get(call.from)!;
    const b = positions.get(call.to)!;
    const line = doc.createElementNS(SVG_NS, "line");
    const sel = ["edge.all"];
    if (cliqueIds.has(call.from) && cliqueIds.has(call.to)) sel.push("edge.clique");
    line.setAttribute("data-sel", sel.join(" "));
    line.setAttribute("data-kind", "edge");
    line.setAttribute("data-paint", "stroke");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("stroke", "#7d8aa5");
    line.setAttribute("stroke-width", "1");
    svg.appendChild(line);
  }

  for (const party of parties) {
    const pos = positions.get(party.id)!;
    const node = doc.createElementNS(SVG_NS, "path");
    const sel = ["node.all"];
    if (party.clique) sel.push("node.clique");
    if ((degrees.get(party.id) ?? 0) >= HIGH_DEGREE_MIN) sel.push("node.high-degree");
    node.setAttribute("data-sel", sel.join(" "));
    node.setAttribute("data-kind", "node");
    node.setAttribute("data-paint", "fill");
    node.setAttribute("data-id", party.id);
    node.setAttribute("data-cx", String(pos.x));
    node.setAttribute("data-cy", String(pos.y));
    node.setAttribute("data-r", "11");
    node.setAttribute("data-prox-dx", String(Math.round((cliqueCenter.x - pos.x) * 100) / 100));
    node.setAttribute("data-prox-dy", String(Math.round((cliqueCenter.y - pos.y) * 100) / 100));
    node.setAttribute("fill", party.incarcerated ? "#8f5fd6" : "#4f7cc9");
    node.setAttribute("stroke", "#1d2742");
    node.setAttribute("stroke-width", "1");
    refreshGeometry(node);
    svg.appendChild(node);

    // attribute badge: arrest count
    const badge = doc.createElementNS(SVG_NS, "text");
    badge.setAttribute("x", String(pos.x));
    badge.setAttribute("y", String(pos.y - 15));
    badge.setAttribute("class", "badge");
    badge.textContent = `${party.name} (${party.arrests})`;
    svg.appendChild(badge);
  }
  container.appendChild(svg);
}
