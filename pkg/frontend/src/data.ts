/**
 * Readers for the simulator's documented output files.
 *
 * records.csv   — one row per (trial, slot), wide per-user columns
 * summary.json  — schema-versioned aggregates (means, ecdfs, probabilities)
 * sweep.csv     — one row per (tradeoff, arrival) campaign cell
 * convergence.csv — per-solver objective traces, one row per iteration
 * kkt_bench.json  — batteryless timing comparison with per-instance traces
 */

import { readFileSync } from "fs";

export interface RecordRow {
  trial: number;
  slot: number;
  tx_power: number;
  objective: number;
  [key: string]: number;
}

export function readCsv(path: string): Record<string, number | string>[] {
  const text = readFileSync(path, "utf-8").trimEnd();
  if (text === "") return [];
  const lines = text.split(/\r?\n/);
  const header = lines[0].split(",");
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, number | string> = {};
    header.forEach((name, i) => {
      const v = Number(cells[i]);
      row[name] = Number.isNaN(v) && cells[i] !== "nan" ? cells[i] : v;
    });
    return row;
  });
}

export function readRecords(path: string): RecordRow[] {
  return readCsv(path) as unknown as RecordRow[];
}

export function numUsers(rows: RecordRow[]): number {
  if (rows.length === 0) return 0;
  return Object.keys(rows[0]).filter((k) => k.startsWith("queue_")).length;
}

export interface Ecdf {
  values: number[];
  probs: number[];
  n: number;
}

export interface Summary {
  schema_version: number;
  solver: string;
  seed: number;
  num_trials: number;
  horizon: number;
  num_users: number;
  avg_tx_power_w: number;
  avg_harvested_total: number;
  avg_battery: number[];
  avg_queue: number[];
  avg_virtual_queue: number[];
  prob_queue_exceed: number[];
  queue_threshold: number[];
  violation_prob: number;
  ecdf_queue: Ecdf[];
  ecdf_battery: Ecdf[];
  ecdf_tx_power: Ecdf;
  config: { battery_capacity: number[]; [key: string]: unknown };
  [key: string]: unknown;
}

export function readSummary(path: string): Summary {
  return JSON.parse(readFileSync(path, "utf-8")) as Summary;
}

export interface SweepRow {
  tradeoff: number;
  mean_arrival: number;
  solver: string;
  avg_tx_power_w: number;
  avg_harvested_total: number;
  avg_battery_mean: number;
  avg_queue_mean: number;
  prob_queue_exceed_max: number;
  [key: string]: number | string;
}

export function readSweep(path: string): SweepRow[] {
  return readCsv(path) as unknown as SweepRow[];
}

export interface ConvergenceRow {
  solver: string;
  instance: number;
  iteration: number;
  objective: number;
  [key: string]: number | string;
}

export function readConvergence(path: string): ConvergenceRow[] {
  return readCsv(path) as unknown as ConvergenceRow[];
}

export interface KktBench {
  report: {
    count: number;
    kernels: string[];
    median_sca_s: number;
    [key: string]: unknown;
  };
  instances: Array<{
    instance: number;
    sca_trace: number[];
    kkt_trace: number[];
    sca_s: number;
    [key: string]: unknown;
  }>;
}

export function readKktBench(path: string): KktBench {
  return JSON.parse(readFileSync(path, "utf-8")) as KktBench;
}
