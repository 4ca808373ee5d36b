import type { CallRecord, Party } from "./types.js";

/**
 * Bundled demo dataset: synthetic call-data-record-style interactions for a
 * small investigation scenario. Parties p1..p4 form a densely connected
 * clique; everything here is fabricated demo content.
 */
export const PARTIES: Party[] = [
  { id: "p1", name: "A. Varga", arrests: 3, gender: "m", birthplace: "Riga", incarcerated: false, clique: true },
  { id: "p2", name: "D. Sorin", arrests: 1, gender: "m", birthplace: "Cluj", incarcerated: false, clique: true },
  { id: "p3", name: "M. Keller", arrests: 4, gender: "f", birthplace: "Graz", incarcerated: true, clique: true },
  { id: "p4", name: "I. Novak", arrests: 2, gender: "m", birthplace: "Brno", incarcerated: false, clique: true },
  { id: "p5", name: "S. Lindt", arrests: 0, gender: "f", birthplace: "Bern", incarcerated: false, clique: false },
  { id: "p6", name: "T. Marsh", arrests: 1, gender: "m", birthplace: "Hull", incarcerated: false, clique: false },
  { id: "p7", name: "E. Costa", arrests: 0, gender: "f", birthplace: "Faro", incarcerated: false, clique: false },
  { id: "p8", name: "R. Olsen", arrests: 2, gender: "m", birthplace: "Oslo", incarcerated: false, clique: false },
  { id: "p9", name: "L. Fuchs", arrests: 0, gender: "f", birthplace: "Linz", incarcerated: false, clique: false },
  { id: "p10", name: "K. Braun", arrests: 1, gender: "m", birthplace: "Kiel", incarcerated: false, clique: false },
  { id: "p11", name: "N. Petrov", arrests: 0, gender: "m", birthplace: "Varna", incarcerated: false, clique: false },
  { id: "p12", name: "J. Weiss", arrests: 0, gender: "f", birthplace: "Ulm", incarcerated: false, clique: false },
];

export const CALLS: CallRecord[] = [
  // dense clique traffic
  { from: "p1", to: "p2", t_min: 12, duration_s: 340 },
  { from: "p1", to: "p3", t_min: 25, duration_s: 95 },
  { from: "p1", to: "p4", t_min: 41, duration_s: 612 },
  { from: "p2", to: "p3", t_min: 55, duration_s: 48 },
  { from: "p2", to: "p4", t_min: 67, duration_s: 410 },
  { from: "p3", to: "p4", t_min: 83, duration_s: 220 },
  { from: "p1", to: "p2", t_min: 95, duration_s: 130 },
  { from: "p2", to: "p1", t_min: 118, duration_s: 75 },
  { from: "p3", to: "p1", t_min: 126, duration_s: 540 },
  { from: "p4", to: "p2", t_min: 149, duration_s: 60 },
  { from: "p1", to: "p3", t_min: 171, duration_s: 305 },
  { from: "p4", to: "p1", t_min: 188, duration_s: 45 },
  { from: "p2", to: "p3", t_min: 210, duration_s: 85 },
  { from: "p3", to: "p2", t_min: 238, duration_s: 400 },
  { from: "p1", to: "p4", t_min: 256, duration_s: 150 },
  // periphery
  { from: "p5", to: "p1", t_min: 33, duration_s: 62 },
  { from: "p6", to: "p2", t_min: 72, duration_s: 44 },
  { from: "p7", to: "p5", t_min: 91, duration_s: 180 },
  { from: "p8", to: "p4", t_min: 105, duration_s: 38 },
  { from: "p9", to: "p8", t_min: 131, duration_s: 240 },
  { from: "p10", to: "p6", t_min: 158, duration_s: 52 },
  { from: "p11", to: "p10", t_min: 176, duration_s: 33 },
  { from: "p12", to: "p7", t_min: 199, duration_s: 410 },
  { from: "p5", to: "p3", t_min: 214, duration_s: 96 },
  { from: "p6", to: "p1", t_min: 228, duration_s: 71 },
  { from: "p8", to: "p9", t_min: 247, duration_s: 300 },
  { from: "p10", to: "p11", t_min: 262, duration_s: 42 },
  { from: "p7", to: "p12", t_min: 275, duration_s: 120 },
  { from: "p5", to: "p7", t_min: 289, duration_s: 66 },
  { from: "p9", to: "p12", t_min: 301, duration_s: 58 },
  // evening burst around the clique (peak window for the histogram)
  { from: "p1", to: "p2", t_min: 312, duration_s: 420 },
  { from: "p3", to: "p4", t_min: 318, duration_s: 380 },
  { from: "p1", to: "p3", t_min: 324, duration_s: 95 },
  { from: "p2", to: "p4", t_min: 330, duration_s: 510 },
  { from: "p4", to: "p3", t_min: 336, duration_s: 75 },
  { from: "p1", to: "p4", t_min: 348, duration_s: 230 },
  { from: "p2", to: "p1", t_min: 354, duration_s: 88 },
];

/** Calls per party, used for the timeline's active-party designation. */
export function callCounts(calls: CallRecord[] = CALLS): Map<string, number> {
  const counts = new Map<string, number>();
  for (const call of calls) {
    counts.set(call.from, (counts.get(call.from) ?? 0) + 1);
    counts.set(call.to, (counts.get(call.to) ?? 0) + 1);
  }
  return counts;
}

export const LONG_CALL_THRESHOLD_S = 300;
