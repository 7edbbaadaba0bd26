/**
 * Plot-level aggregations over record rows.
 *
 * The empirical-CDF downsampling mirrors the simulator's documented rule
 * (order statistics at rounded evenly spaced ranks) so any curve shown can
 * be checked bitwise against summary.json.
 */

import { RecordRow, Ecdf } from "./data.js";

export function mean(xs: number[]): number {
  return xs.length === 0 ? 0 : xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function column(rows: RecordRow[], name: string): number[] {
  return rows.map((r) => r[name] as number);
}

/** Round half to even, matching numpy's rounding in the reference rule. */
function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const frac = x - floor;
  if (frac > 0.5) return floor + 1;
  if (frac < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

export function ecdf(samples: number[], maxPoints = 512): Ecdf {
  const x = [...samples].sort((a, b) => a - b);
  const n = x.length;
  if (n === 0) return { values: [], probs: [], n: 0 };
  const m = Math.min(n, maxPoints);
  const idx = new Set<number>();
  for (let k = 0; k < m; k++) {
    idx.add(roundHalfEven((k * (n - 1)) / (m - 1 || 1)));
  }
  const sorted = [...idx].sort((a, b) => a - b);
  return {
    values: sorted.map((i) => x[i]),
    probs: sorted.map((i) => (i + 1) / n),
    n,
  };
}

/** Per-slot trace averaged over trials for one per-user column. */
export function trialMeanTrace(rows: RecordRow[], name: string): number[] {
  const bySlot = new Map<number, number[]>();
  for (const r of rows) {
    const slot = r.slot as number;
    if (!bySlot.has(slot)) bySlot.set(slot, []);
    bySlot.get(slot)!.push(r[name] as number);
  }
  return [...bySlot.keys()]
    .sort((a, b) => a - b)
    .map((slot) => mean(bySlot.get(slot)!));
}

/** Trace of one column for a single trial, ordered by slot. */
export function trialTrace(rows: RecordRow[], trial: number, name: string): number[] {
  return rows
    .filter((r) => r.trial === trial)
    .sort((a, b) => (a.slot as number) - (b.slot as number))
    .map((r) => r[name] as number);
}
