/** Grouping and aggregation of run series for plotting. */

import { RunData } from "./csv.js";

/** Map group-by keys onto the run's config.resolved sections. */
const KEY_ALIASES: Record<string, string> = {
  backward: "backward.kind",
  objective: "objective.kind",
  lr: "training.lr",
  seed: "training.seed",
};

export function groupValue(run: RunData, key: string): string {
  const alias = KEY_ALIASES[key] ?? key;
  const v = run.config[alias];
  if (v === undefined) return "?";
  if (key === "lr") {
    const num = Number(v);
    return Number.isFinite(num) ? String(num) : v;
  }
  return v;
}

export function groupLabel(run: RunData, keys: string[]): string {
  return keys.map((k) => `${k}=${groupValue(run, k)}`).join(" ");
}

export function requireColumns(runs: RunData[], names: string[]): void {
  for (const run of runs) {
    for (const name of names) {
      if (!run.columns.includes(name)) {
        throw new Error(`column '${name}' missing from ${run.csvPath}`);
      }
    }
  }
}

export interface SeriesPoint {
  x: number;
  mean: number;
  std: number;
  n: number;
}

export interface GroupSeries {
  label: string;
  points: SeriesPoint[];
  numRuns: number;
}

function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

function std(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  return Math.sqrt(xs.reduce((a, b) => a + (b - m) * (b - m), 0) / (xs.length - 1));
}

export function groupRuns(runs: RunData[], keys: string[]): Map<string, RunData[]> {
  const groups = new Map<string, RunData[]>();
  for (const run of runs) {
    const label = groupLabel(run, keys);
    const list = groups.get(label) ?? [];
    list.push(run);
    groups.set(label, list);
  }
  return new Map([...groups.entries()].sort((a, b) => a[0].localeCompare(b[0])));
}

/** Mean +- std over the runs of each group, aligned on the x column. */
export function aggregateSeries(
  runs: RunData[], keys: string[], xCol: string, metric: string,
): GroupSeries[] {
  requireColumns(runs, [xCol, metric]);
  const out: GroupSeries[] = [];
  for (const [label, members] of groupRuns(runs, keys)) {
    const byX = new Map<number, number[]>();
    for (const run of members) {
      for (const row of run.rows) {
        const x = row[xCol];
        const y = row[metric];
        if (x === null || y === null) continue;
        const list = byX.get(x) ?? [];
        list.push(y);
        byX.set(x, list);
      }
    }
    const points = [...byX.entries()]
      .filter(([, ys]) => ys.length === members.length) // x common to all seeds
      .sort((a, b) => a[0] - b[0])
      .map(([x, ys]) => ({ x, mean: mean(ys), std: std(ys), n: ys.length }));
    out.push({ label, points, numRuns: members.length });
  }
  return out;
}

export interface BarDatum {
  label: string;
  mean: number;
  std: number;
  n: number;
}

/** Best-over-checkpoints per run, then mean +- std over each group. */
export function aggregateBest(
  runs: RunData[], keys: string[], metric: string, how: "max" | "min" = "max",
): BarDatum[] {
  requireColumns(runs, [metric]);
  const out: BarDatum[] = [];
  for (const [label, members] of groupRuns(runs, keys)) {
    const bests: number[] = [];
    for (const run of members) {
      const vals = run.rows.map((r) => r[metric]).filter((v): v is number => v !== null);
      if (vals.length === 0) continue;
      bests.push(how === "max" ? Math.max(...vals) : Math.min(...vals));
    }
    if (bests.length > 0) {
      out.push({ label, mean: mean(bests), std: std(bests), n: bests.length });
    }
  }
  return out;
}
