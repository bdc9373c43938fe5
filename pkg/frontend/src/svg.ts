/** Deterministic SVG plotting primitives (no timestamps, stable ordering). */

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_SIZE = { width: 720, height: 440 };
export const DEFAULT_MARGINS: Margins = { top: 36, right: 20, bottom: 48, left: 64 };

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) {
    return v.toExponential(1).replace("e+", "e").replace(/e(-?)0*(\d)/, "e$1$2");
  }
  const s = v.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

const r2 = (v: number) => (Math.round(v * 100) / 100).toFixed(2);

export class LinearScale {
  constructor(
    public lo: number, public hi: number,
    public rlo: number, public rhi: number, public log = false,
  ) {
    if (log) {
      this.lo = Math.log10(lo);
      this.hi = Math.log10(hi);
    }
    if (this.hi === this.lo) {
      this.hi = this.lo + 1;
    }
  }

  map(v: number): number {
    const t = this.log ? Math.log10(v) : v;
    return this.rlo + ((t - this.lo) / (this.hi - this.lo)) * (this.rhi - this.rlo);
  }

  ticks(target = 6): number[] {
    if (this.log) {
      const out: number[] = [];
      for (let p = Math.ceil(this.lo); p <= Math.floor(this.hi); p++) out.push(10 ** p);
      if (out.length >= 2) return out;
    }
    const span = this.hi - this.lo;
    const raw = span / target;
    const mag = 10 ** Math.floor(Math.log10(raw));
    const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target) ?? mag * 10;
    const out: number[] = [];
    for (let t = Math.ceil(this.lo / step) * step; t <= this.hi + 1e-12 * span; t += step) {
      out.push(Math.abs(t) < step * 1e-9 ? 0 : t);
    }
    return this.log ? out.map((t) => 10 ** t) : out;
  }
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(public width = DEFAULT_SIZE.width, public height = DEFAULT_SIZE.height) {}

  add(el: string): void {
    this.parts.push(el);
  }

  text(x: number, y: number, s: string, opts = ""): void {
    this.add(`<text x="${r2(x)}" y="${r2(y)}" font-family="sans-serif" ${opts}>${escapeXml(s)}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, w = 1): void {
    this.add(`<line x1="${r2(x1)}" y1="${r2(y1)}" x2="${r2(x2)}" y2="${r2(y2)}" stroke="${stroke}" stroke-width="${w}"/>`);
  }

  polyline(pts: Array<[number, number]>, stroke: string, w = 1.8): void {
    const d = pts.map(([x, y]) => `${r2(x)},${r2(y)}`).join(" ");
    this.add(`<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${w}"/>`);
  }

  polygon(pts: Array<[number, number]>, fill: string, opacity: number): void {
    const d = pts.map(([x, y]) => `${r2(x)},${r2(y)}`).join(" ");
    this.add(`<polygon points="${d}" fill="${fill}" fill-opacity="${opacity}" stroke="none"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opts = ""): void {
    this.add(`<rect x="${r2(x)}" y="${r2(y)}" width="${r2(w)}" height="${r2(h)}" fill="${fill}" ${opts}/>`);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Frame {
  xs: LinearScale;
  ys: LinearScale;
}

export function drawAxes(
  doc: SvgDoc, xs: LinearScale, ys: LinearScale,
  xLabel: string, yLabel: string, title: string,
): void {
  const m = DEFAULT_MARGINS;
  doc.line(m.left, doc.height - m.bottom, doc.width - m.right, doc.height - m.bottom, "#333");
  doc.line(m.left, m.top, m.left, doc.height - m.bottom, "#333");
  for (const t of xs.ticks()) {
    const x = xs.map(t);
    doc.line(x, doc.height - m.bottom, x, doc.height - m.bottom + 4, "#333");
    doc.text(x, doc.height - m.bottom + 18, fmt(t), 'text-anchor="middle" font-size="11"');
  }
  for (const t of ys.ticks()) {
    const y = ys.map(t);
    doc.line(m.left - 4, y, m.left, y, "#333");
    doc.line(m.left, y, doc.width - m.right, y, "#eee");
    doc.text(m.left - 8, y + 4, fmt(t), 'text-anchor="end" font-size="11"');
  }
  doc.text((m.left + doc.width - m.right) / 2, doc.height - 12, xLabel,
    'text-anchor="middle" font-size="12"');
  doc.add(`<text x="16" y="${r2((m.top + doc.height - m.bottom) / 2)}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 ${r2((m.top + doc.height - m.bottom) / 2)})">${escapeXml(yLabel)}</text>`);
  doc.text((m.left + doc.width - m.right) / 2, 20, title,
    'text-anchor="middle" font-size="14" font-weight="bold"');
}

export function drawLegend(doc: SvgDoc, labels: string[]): void {
  const m = DEFAULT_MARGINS;
  labels.forEach((label, i) => {
    const y = m.top + 8 + i * 16;
    const x = doc.width - m.right - 190;
    doc.rect(x, y - 8, 14, 3, PALETTE[i % PALETTE.length]);
    doc.text(x + 20, y, label, 'font-size="11"');
  });
}
