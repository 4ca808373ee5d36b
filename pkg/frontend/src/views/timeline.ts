import { LONG_CALL_THRESHOLD_S, callCounts } from "../data.js";
import type { CallRecord, Party } from "../types.js";
import { refreshGeometry } from "../apply.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 720;
const ROW_H = 34;
const LEFT = 110;

/** Per-party call tracks over time; marker width encodes call duration. */
export function renderTimeline(
  container: Element,
  parties: Party[],
  calls: CallRecord[],
): void {
  const doc = container.ownerDocument!;
  container.innerHTML = "";
  const counts = callCounts(calls);
  const activeParty = [...counts.entries()].sort(
    (a, b) => b[1] - a[1] || a[0].localeCompare(b[0]),
  )[0]?.[0];
  const tMax = Math.max(...calls.map((c) => c.t_min)) + 10;
  const height = parties.length * ROW_H + 30;
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${height}`);
  svg.setAttribute("data-view", "timeline");
  const xOf = (t: number) => LEFT + ((WIDTH - LEFT - 20) * t) / tMax;

  parties.forEach((party, row) => {
    const y = 24 + row * ROW_H;
    const isActive = party.id === activeParty;
    const track = doc.createElementNS(SVG_NS, "line");
    const sel = ["track.all"];
    if (isActive) sel.push("track.active-party");
    track.setAttribute("data-sel", sel.join(" "));
    track.setAttribute("data-kind", "track");
    track.setAttribute("data-paint", "stroke");
    track.setAttribute("data-id", party.id);
    // proximity target: the top row
    track.setAttribute("data-prox-dx", "0");
    track.setAttribute("data-prox-dy", String(24 - y));
    track.setAttribute("x1", String(LEFT));
    track.setAttribute("y1", String(y));
    track.setAttribute("x2", String(WIDTH - 20));
    track.setAttribute("y2", String(y));
    track.setAttribute("stroke", "#3c4a68");
    track.setAttribute("stroke-width", "1");
    svg.appendChild(track);

    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", "8");
    label.setAttribute("y", String(y + 4));
    label.setAttribute("class", "badge");
    label.textContent = party.name;
    svg.appendChild(label);

    for (const call of calls) {
      if (call.from !== party.id) continue;
      const marker = doc.createElementNS(SVG_NS, "path");
      const msel = ["marker.call"];
      if (call.duration_s > LONG_CALL_THRESHOLD_S) msel.push("marker.long-call");
      marker.setAttribute("data-sel", msel.join(" "));
      marker.setAttribute("data-kind", "marker");
      marker.setAttribute("data-paint", "fill");
      marker.setAttribute("data-cx", String(Math.round(xOf(call.t_min) * 100) / 100));
      marker.setAttribute("data-cy", String(y));
      marker.setAttribute("data-r", String(3 + Math.min(call.duration_s / 150, 4)));
      marker.setAttribute("data-prox-dx", "0");
      marker.setAttribute("data-prox-dy", "0");
      marker.setAttribute("fill", "#6fa3e0");
      refreshGeometry(marker);
      svg.appendChild(marker);
    }
  });
  container.appendChild(svg);
}
