/**
 * Figure analogues F3-F11 rendered from exported experiment files.
 *
 * Input directory layout (all produced by the simulator CLI):
 *   sweep.csv, V<V>_a<alpha>/{records.csv, summary.json}   (sweep)
 *   convergence.csv                                        (compare-solvers)
 *   kkt_bench.json                                         (bench-kkt)
 *
 * Figures F5, F9, F10 read the base cell (lowest tradeoff, highest arrival);
 * F11 contrasts the lowest and highest tradeoff at the same arrival rate.
 */

import { existsSync, readdirSync } from "fs";
import { join } from "path";

import {
  readConvergence, readKktBench, readRecords, readSummary, readSweep,
  Summary,
} from "./data.js";
import { ecdf, column, trialMeanTrace, trialTrace } from "./aggregate.js";
import { renderChart, Series, ChartSpec } from "./svg.js";

export const FIGURE_IDS = [
  "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11",
] as const;
export type FigureId = (typeof FIGURE_IDS)[number];

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export class MissingColumnError extends Error {}

function need(
  row: Record<string, unknown>, cols: string[], file: string
): void {
  for (const c of cols) {
    if (!(c in row)) {
      throw new MissingColumnError(`${file} is missing column '${c}'`);
    }
  }
}

interface CellRef {
  dir: string;
  tradeoff: number;
  arrival: number;
}

export function sweepCells(inDir: string): CellRef[] {
  const cells: CellRef[] = [];
  for (const name of readdirSync(inDir)) {
    const m = /^V([0-9.]+)_a([0-9.]+)$/.exec(name);
    if (m && existsSync(join(inDir, name, "summary.json"))) {
      cells.push({
        dir: join(inDir, name),
        tradeoff: parseFloat(m[1]),
        arrival: parseFloat(m[2]),
      });
    }
  }
  cells.sort((a, b) => a.tradeoff - b.tradeoff || a.arrival - b.arrival);
  if (cells.length === 0) {
    throw new Error(`no sweep cells (V*_a*/summary.json) under ${inDir}`);
  }
  return cells;
}

function baseCell(inDir: string): CellRef {
  const cells = sweepCells(inDir);
  const minV = Math.min(...cells.map((c) => c.tradeoff));
  const atMin = cells.filter((c) => c.tradeoff === minV);
  atMin.sort((a, b) => b.arrival - a.arrival);
  return atMin[0];
}

function convergenceChart(
  rows: ReturnType<typeof readConvergence>, title: string
): ChartSpec {
  const solvers = [...new Set(rows.map((r) => r.solver))];
  const instance = Math.min(...rows.map((r) => r.instance));
  const series: Series[] = solvers.map((solver, i) => {
    const trace = rows
      .filter((r) => r.solver === solver && r.instance === instance)
      .sort((a, b) => a.iteration - b.iteration);
    return {
      x: trace.map((r) => r.iteration),
      y: trace.map((r) => r.objective),
      color: COLORS[i % COLORS.length],
      label: solver,
      marker: true,
    };
  });
  return {
    title,
    xLabel: "iteration",
    yLabel: "per-slot objective",
    series,
  };
}

function renderF3(inDir: string): string {
  const path = join(inDir, "convergence.csv");
  const rows = readConvergence(path);
  if (rows.length) need(rows[0], ["solver", "instance", "iteration", "objective"], path);
  return renderChart(convergenceChart(
    rows, "Convergence: lifted vs direct per-slot solvers"
  ));
}

function renderF4(inDir: string): string {
  const bench = readKktBench(join(inDir, "kkt_bench.json"));
  const inst = bench.instances[0] ?? { sca_trace: [], kkt_trace: [] };
  const series: Series[] = [
    {
      x: inst.sca_trace.map((_, i) => i),
      y: inst.sca_trace,
      color: COLORS[0],
      label: "convex approx.",
      marker: true,
    },
    {
      x: inst.kkt_trace.map((_, i) => i),
      y: inst.kkt_trace,
      color: COLORS[1],
      label: "closed form",
    },
  ];
  const med = bench.report.median_sca_s;
  const medK = bench.report[`median_kkt_${bench.report.kernels[0]}_s`] as number;
  return renderChart({
    title: `Batteryless solvers (median ${(med * 1e3).toFixed(1)} ms vs ` +
      `${(medK * 1e3).toFixed(2)} ms)`,
    xLabel: "iteration",
    yLabel: "objective",
    series,
  });
}

function queueEcdfSeries(summary: Summary): Series[] {
  return summary.ecdf_queue.map((e, u) => ({
    x: e.values,
    y: e.probs,
    color: COLORS[u % COLORS.length],
    label: `user ${u}`,
    step: true,
  }));
}

function renderF5(inDir: string): string {
  const cell = baseCell(inDir);
  const summary = readSummary(join(cell.dir, "summary.json"));
  return renderChart({
    title: `Queue backlog ecdf (V=${cell.tradeoff}, arrivals=${cell.arrival})`,
    xLabel: "queue backlog [bits]",
    yLabel: "empirical CDF",
    series: queueEcdfSeries(summary),
    vlines: [{ x: summary.queue_threshold[0], label: "threshold" }],
    hlines: [{ y: 1 - summary.violation_prob, label: "1 - tolerance" }],
  });
}

function sweepSeries(
  inDir: string, field: keyof ReturnType<typeof readSweep>[number],
  yLabel: string, title: string
): string {
  const path = join(inDir, "sweep.csv");
  const rows = readSweep(path);
  if (rows.length) need(rows[0], ["tradeoff", "mean_arrival", String(field)], path);
  const arrivals = [...new Set(rows.map((r) => r.mean_arrival))].sort();
  const series: Series[] = arrivals.map((a, i) => {
    const sub = rows.filter((r) => r.mean_arrival === a)
      .sort((x, y) => x.tradeoff - y.tradeoff);
    return {
      x: sub.map((r) => r.tradeoff),
      y: sub.map((r) => r[field] as number),
      color: COLORS[i % COLORS.length],
      label: `arrivals=${a}`,
      marker: true,
    };
  });
  return renderChart({
    title, xLabel: "power-cost weight", yLabel, series,
  });
}

function renderF9or10(inDir: string, col: "queue" | "virtual"): string {
  const cell = baseCell(inDir);
  const path = join(cell.dir, "records.csv");
  const rows = readRecords(path);
  if (rows.length) need(rows[0], ["trial", "slot", `${col}_0`], path);
  const users = Object.keys(rows[0] ?? { queue_0: 0 })
    .filter((k) => k.startsWith(`${col}_`)).length || 1;
  const trial = rows.length ? Math.min(...rows.map((r) => r.trial)) : 0;
  const series: Series[] = [];
  for (let u = 0; u < users; u++) {
    const y = trialTrace(rows, trial, `${col}_${u}`);
    series.push({
      x: y.map((_, i) => i),
      y,
      color: COLORS[u % COLORS.length],
      label: `user ${u}`,
    });
  }
  const what = col === "queue" ? "Data queue" : "Virtual queue";
  return renderChart({
    title: `${what} dynamics (single trajectory, V=${cell.tradeoff})`,
    xLabel: "slot",
    yLabel: `${what.toLowerCase()} [bits]`,
    series,
  });
}

function renderF11(inDir: string): string {
  const cells = sweepCells(inDir);
  const arrival = Math.max(...cells.map((c) => c.arrival));
  const atA = cells.filter((c) => c.arrival === arrival);
  const lo = atA[0];
  const hi = atA[atA.length - 1];
  const series: Series[] = [];
  [lo, hi].forEach((cell, i) => {
    const summary = readSummary(join(cell.dir, "summary.json"));
    summary.ecdf_battery.forEach((e, u) => {
      series.push({
        x: e.values,
        y: e.probs,
        color: COLORS[(2 * i + u) % COLORS.length],
        label: `V=${cell.tradeoff}, user ${u}`,
        step: true,
        dash: i === 1 ? "5,3" : undefined,
      });
    });
  });
  return renderChart({
    title: `Battery level ecdf (arrivals=${arrival})`,
    xLabel: "battery level [J]",
    yLabel: "empirical CDF",
    series,
  });
}

export function renderFigure(id: FigureId, inDir: string): string {
  switch (id) {
    case "F3":
      return renderF3(inDir);
    case "F4":
      return renderF4(inDir);
    case "F5":
      return renderF5(inDir);
    case "F6":
      return sweepSeries(inDir, "avg_tx_power_w", "average transmit power [W]",
        "Average transmit power vs power-cost weight");
    case "F7":
      return sweepSeries(inDir, "avg_harvested_total",
        "average harvested energy [J/slot]",
        "Average harvested energy vs power-cost weight");
    case "F8":
      return sweepSeries(inDir, "avg_battery_mean", "average battery level [J]",
        "Average battery level vs power-cost weight");
    case "F9":
      return renderF9or10(inDir, "queue");
    case "F10":
      return renderF9or10(inDir, "virtual");
    case "F11":
      return renderF11(inDir);
  }
}
