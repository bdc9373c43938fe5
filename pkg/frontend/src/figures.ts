/** The three figure types: convergence curves, mode-discovery steps,
 * best-correlation bars. All render to deterministic SVG strings. */

import { RunData } from "./csv.js";
import { aggregateBest, aggregateSeries, GroupSeries } from "./data.js";
import {
  DEFAULT_MARGINS as M, DEFAULT_SIZE, LinearScale, PALETTE, SvgDoc,
  drawAxes, drawLegend, fmt,
} from "./svg.js";

export interface FigureSpec {
  glob: string;
  type: "curve" | "steps" | "bars";
  metric: string;
  x: string;
  groupBy: string[];
  out: string;
  format: "svg" | "png";
  logy?: boolean;
  title?: string;
}

function dataBounds(series: GroupSeries[], band: boolean, logy: boolean) {
  let xlo = Infinity, xhi = -Infinity, ylo = Infinity, yhi = -Infinity;
  for (const g of series) {
    for (const p of g.points) {
      const lo = band && g.numRuns > 1 ? p.mean - p.std : p.mean;
      const hi = band && g.numRuns > 1 ? p.mean + p.std : p.mean;
      xlo = Math.min(xlo, p.x);
      xhi = Math.max(xhi, p.x);
      if (!logy || lo > 0) ylo = Math.min(ylo, lo);
      if (!logy || hi > 0) yhi = Math.max(yhi, hi);
    }
  }
  if (!Number.isFinite(xlo)) throw new Error("no plottable points after grouping");
  if (ylo === yhi) {
    ylo -= 0.5;
    yhi += 0.5;
  }
  return { xlo, xhi, ylo, yhi };
}

function frame(b: { xlo: number; xhi: number; ylo: number; yhi: number },
               doc: SvgDoc, logy: boolean) {
  const xs = new LinearScale(b.xlo, b.xhi, M.left, doc.width - M.right);
  const pad = logy ? 0 : 0.05 * (b.yhi - b.ylo);
  const ys = new LinearScale(
    logy ? b.ylo : b.ylo - pad, logy ? b.yhi : b.yhi + pad,
    doc.height - M.bottom, M.top, logy,
  );
  return { xs, ys };
}

/** Mean curve per group with a +-std band when the group has several seeds. */
export function renderCurves(runs: RunData[], spec: FigureSpec): string {
  const series = aggregateSeries(runs, spec.groupBy, spec.x, spec.metric);
  const logy = spec.logy ?? false;
  const doc = new SvgDoc();
  const { xs, ys } = frame(dataBounds(series, true, logy), doc, logy);
  drawAxes(doc, xs, ys, spec.x, spec.metric,
    spec.title ?? `${spec.metric} over ${spec.x}`);
  series.forEach((g, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = logy ? g.points.filter((p) => p.mean > 0) : g.points;
    if (g.numRuns > 1) {
      const upper = pts.map((p): [number, number] =>
        [xs.map(p.x), ys.map(clampLog(p.mean + p.std, logy))]);
      const lower = pts.map((p): [number, number] =>
        [xs.map(p.x), ys.map(clampLog(p.mean - p.std, logy, p.mean))]).reverse();
      doc.polygon([...upper, ...lower], color, 0.15);
    }
    doc.polyline(pts.map((p) => [xs.map(p.x), ys.map(p.mean)]), color);
  });
  drawLegend(doc, series.map((g) => g.label));
  return doc.render();
}

function clampLog(v: number, logy: boolean, fallback = 1e-300): number {
  if (!logy || v > 0) return v;
  return fallback > 0 ? fallback : 1e-300;
}

/** Monotone step curves (mode counts): horizontal segments between changes. */
export function renderSteps(runs: RunData[], spec: FigureSpec): string {
  const series = aggregateSeries(runs, spec.groupBy, spec.x, spec.metric);
  const doc = new SvgDoc();
  const { xs, ys } = frame(dataBounds(series, false, false), doc, false);
  drawAxes(doc, xs, ys, spec.x, spec.metric,
    spec.title ?? `${spec.metric} over ${spec.x}`);
  series.forEach((g, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts: Array<[number, number]> = [];
    g.points.forEach((p, j) => {
      if (j > 0) pts.push([xs.map(p.x), ys.map(g.points[j - 1].mean)]);
      pts.push([xs.map(p.x), ys.map(p.mean)]);
    });
    doc.polyline(pts, color);
  });
  drawLegend(doc, series.map((g) => g.label));
  return doc.render();
}

/** One bar per group: best-over-checkpoints metric, mean +- std over seeds. */
export function renderBars(runs: RunData[], spec: FigureSpec): string {
  const how = spec.metric.startsWith("l1") ? "min" : "max";
  const bars = aggregateBest(runs, spec.groupBy, spec.metric, how);
  if (bars.length === 0) throw new Error("no plottable groups");
  const doc = new SvgDoc(Math.max(DEFAULT_SIZE.width, 120 + bars.length * 90),
    DEFAULT_SIZE.height);
  let ylo = Math.min(0, ...bars.map((b) => b.mean - b.std));
  let yhi = Math.max(0, ...bars.map((b) => b.mean + b.std));
  if (ylo === yhi) yhi = ylo + 1;
  const pad = 0.08 * (yhi - ylo);
  const ys = new LinearScale(ylo - (ylo < 0 ? pad : 0), yhi + pad,
    doc.height - M.bottom, M.top);
  const slot = (doc.width - M.left - M.right) / bars.length;
  drawAxes(doc, new LinearScale(0, 1, M.left, doc.width - M.right), ys,
    spec.groupBy.join(" / "), `best ${spec.metric} (${how} over checkpoints)`,
    spec.title ?? `best ${spec.metric} by ${spec.groupBy.join(", ")}`);
  const zero = ys.map(Math.max(ylo, 0));
  bars.forEach((b, i) => {
    const color = PALETTE[i % PALETTE.length];
    const cx = M.left + slot * (i + 0.5);
    const w = slot * 0.6;
    const top = ys.map(b.mean);
    doc.rect(cx - w / 2, Math.min(top, zero), w, Math.abs(top - zero), color,
      'fill-opacity="0.8"');
    if (b.n > 1) {
      doc.line(cx, ys.map(b.mean - b.std), cx, ys.map(b.mean + b.std), "#333", 1.5);
      doc.line(cx - 5, ys.map(b.mean + b.std), cx + 5, ys.map(b.mean + b.std), "#333", 1.5);
      doc.line(cx - 5, ys.map(b.mean - b.std), cx + 5, ys.map(b.mean - b.std), "#333", 1.5);
    }
    doc.text(cx, doc.height - M.bottom + 32, b.label, 'text-anchor="middle" font-size="10"');
    doc.text(cx, Math.min(top, zero) - 4, fmt(b.mean), 'text-anchor="middle" font-size="10"');
  });
  return doc.render();
}

export function renderFigure(runs: RunData[], spec: FigureSpec): string {
  switch (spec.type) {
    case "curve":
      return renderCurves(runs, spec);
    case "steps":
      return renderSteps(runs, spec);
    case "bars":
      return renderBars(runs, spec);
    default:
      throw new Error(`unknown figure type '${(spec as FigureSpec).type}'`);
  }
}
