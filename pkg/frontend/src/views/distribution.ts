import type { CallRecord } from "../types.js";
import { refreshGeometry } from "../apply.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 720;
const HEIGHT = 300;
const BASE_Y = HEIGHT - 30;

/** Call-volume histogram over a selectable bucket width (minutes). */
export function renderDistribution(
  container: Element,
  calls: CallRecord[],
  bucketMin = 60,
): void {
  const doc = container.ownerDocument!;
  container.innerHTML = "";
  const tMax = Math.max(...calls.map((c) => c.t_min));
  const nBuckets = Math.floor(tMax / bucketMin) + 1;
  const counts = new Array(nBuckets).fill(0);
  for (const call of calls) {
    counts[Math.floor(call.t_min / bucketMin)] += 1;
  }
  const peak = counts.indexOf(Math.max(...counts));
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("data-view", "distribution");
  svg.setAttribute("data-bucket-min", String(bucketMin));
  const slot = (WIDTH - 80) / nBuckets;
  const yScale = (BASE_Y - 30) / Math.max(...counts, 1);

  counts.forEach((count, i) => {
    const h = count * yScale;
    const bar = doc.createElementNS(SVG_NS, "rect");
    const sel = ["bar.all", i === peak ? "bar.peak" : "bar.offpeak"];
    bar.setAttribute("data-sel", sel.join(" "));
    bar.setAttribute("data-kind", "bar");
    bar.setAttribute("data-paint", "fill");
    bar.setAttribute("class", "bar");
    bar.setAttribute("data-x", String(50 + i * slot + slot * 0.125));
    bar.setAttribute("data-y", String(BASE_Y - h));
    bar.setAttribute("data-w", String(slot * 0.75));
    bar.setAttribute("data-h", String(h));
    bar.setAttribute("data-prox-dx", String((peak - i) * slot * 0.2));
    bar.setAttribute("data-prox-dy", "0");
    bar.setAttribute("fill", "#4f7cc9");
    bar.setAttribute("stroke", "#1d2742");
    bar.setAttribute("stroke-width", "1");
    refreshGeometry(bar);
    svg.appendChild(bar);

    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(50 + i * slot + slot / 2));
    label.setAttribute("y", String(BASE_Y + 16));
    label.setAttribute("class", "badge");
    label.textContent = `${i * bucketMin}m`;
    svg.appendChild(label);
  });
  container.appendChild(svg);
}
