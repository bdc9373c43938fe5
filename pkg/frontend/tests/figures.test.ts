import { mkdtempSync, mkdirSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { expandGlob, loadRuns, parseConfig, parseCsv } from "../src/csv.js";
import { aggregateBest, aggregateSeries, groupLabel } from "../src/data.js";
import { renderFigure } from "../src/figures.js";
import { main } from "../src/main.js";
import { fmt } from "../src/svg.js";

const HEADER =
  "iteration,trajectories_sampled,loss_forward,loss_backward,l1_exact," +
  "l1_empirical,spearman,pearson,modes_found,log_z_estimate,kl_exact," +
  "pb_drift_l1,lr_forward,lr_backward,epsilon,wall_time_s,seed";

function writeRun(root: string, name: string, cfg: Record<string, string>,
                  rows: string[]): string {
  const dir = path.join(root, name);
  mkdirSync(dir, { recursive: true });
  writeFileSync(path.join(dir, "metrics.csv"), [HEADER, ...rows, ""].join("\n"));
  const sections = new Map<string, string[]>();
  for (const [k, v] of Object.entries(cfg)) {
    const [sec, key] = k.split(".");
    const lines = sections.get(sec) ?? [];
    lines.push(`${key} = ${v}`);
    sections.set(sec, lines);
  }
  const text = [...sections.entries()]
    .map(([sec, lines]) => `[${sec}]\n${lines.join("\n")}`)
    .join("\n\n");
  writeFileSync(path.join(dir, "config.resolved"), text + "\n");
  return dir;
}

function row(it: number, l1: number, modes: number, spearman: number | "",
             seed: number): string {
  return `${it},${it * 16},0.5,,${l1},,${spearman},,${modes},,0.1,,0.001,0.001,0,,${seed}`;
}

function makeSweep(): string {
  const root = mkdtempSync(path.join(tmpdir(), "figtest-"));
  for (const lr of ["0.001", "0.002"]) {
    for (const seed of [0, 1, 2]) {
      writeRun(root, `lr${lr}_seed${seed}`, {
        "backward.kind": "tlm", "objective.kind": "subtb",
        "training.lr": lr, "training.seed": String(seed),
      }, [
        row(0, 1.6 + 0.01 * seed, 0, "", seed),
        row(100, 0.8 + 0.01 * seed, 2, 0.3 + 0.1 * seed, seed),
        row(200, 0.2 + 0.01 * seed, 4, 0.6 + 0.05 * seed, seed),
      ]);
    }
  }
  return root;
}

describe("csv", () => {
  it("parses empty fields as null and numerics as numbers", () => {
    const { columns, rows } = parseCsv("a,b,c\n1,,2.5\n,3,\n");
    expect(columns).toEqual(["a", "b", "c"]);
    expect(rows[0]).toEqual({ a: 1, b: null, c: 2.5 });
    expect(rows[1]).toEqual({ a: null, b: 3, c: null });
  });

  it("parses flat sectioned configs", () => {
    const cfg = parseConfig("[training]\nlr = 1e-3\nseed = 4\n\n[backward]\nkind = tlm\n");
    expect(cfg["training.lr"]).toBe("1e-3");
    expect(cfg["backward.kind"]).toBe("tlm");
  });

  it("expands globs deterministically", () => {
    const root = makeSweep();
    const files = expandGlob(path.join(root, "*", "metrics.csv"));
    expect(files).toHaveLength(6);
    expect(files).toEqual([...files].sort());
    expect(expandGlob(path.join(root, "**", "metrics.csv"))).toHaveLength(6);
    expect(expandGlob(path.join(root, "nope*", "metrics.csv"))).toHaveLength(0);
  });

  it("raises on an empty glob", () => {
    expect(() => loadRuns("/definitely/not/here/*.csv")).toThrow(/no CSV files/);
  });
});

describe("aggregation", () => {
  it("groups by config keys and averages over seeds", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const series = aggregateSeries(runs, ["backward", "lr"], "iteration", "l1_exact");
    expect(series.map((s) => s.label)).toEqual([
      "backward=tlm lr=0.001", "backward=tlm lr=0.002"]);
    const s = series[0];
    expect(s.numRuns).toBe(3);
    expect(s.points.map((p) => p.x)).toEqual([0, 100, 200]);
    expect(s.points[2].mean).toBeCloseTo(0.21, 12);
    expect(s.points[2].std).toBeCloseTo(0.01, 12);
  });

  it("takes the best checkpoint then averages over seeds", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const bars = aggregateBest(runs, ["lr"], "spearman", "max");
    expect(bars).toHaveLength(2);
    expect(bars[0].mean).toBeCloseTo((0.6 + 0.65 + 0.7) / 3, 12);
  });

  it("names the missing column and file", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    expect(() => aggregateSeries(runs, ["lr"], "iteration", "nope"))
      .toThrow(/column 'nope' missing from .*metrics\.csv/);
  });

  it("labels unknown keys with a placeholder", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    expect(groupLabel(runs[0], ["wat"])).toBe("wat=?");
  });
});

describe("figures", () => {
  const base = { x: "iteration", groupBy: ["backward", "lr"], format: "svg" as const };

  it("renders curves with a std band for multi-seed groups", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const svg = renderFigure(runs, {
      ...base, glob: "", type: "curve", metric: "l1_exact", out: "" });
    expect(svg).toContain("<svg");
    expect(svg).toContain("<polygon");   // the band
    expect(svg).toContain("<polyline");
  });

  it("renders single-seed curves without a band", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "lr0.001_seed0", "metrics.csv"));
    const svg = renderFigure(runs, {
      ...base, glob: "", type: "curve", metric: "l1_exact", out: "" });
    expect(svg).not.toContain("<polygon");
  });

  it("renders monotone step curves for modes", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const svg = renderFigure(runs, {
      ...base, glob: "", type: "steps", metric: "modes_found",
      x: "trajectories_sampled", out: "" });
    expect(svg).toContain("<polyline");
  });

  it("renders one bar per group with whiskers", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const svg = renderFigure(runs, {
      ...base, glob: "", type: "bars", metric: "spearman", out: "" });
    expect((svg.match(/<rect/g) ?? []).length).toBeGreaterThanOrEqual(3);
  });

  it("is a pure function of the inputs (byte-identical re-render)", () => {
    const root = makeSweep();
    const runs = loadRuns(path.join(root, "*", "metrics.csv"));
    const spec = { ...base, glob: "", type: "curve" as const,
      metric: "l1_exact", out: "" };
    expect(renderFigure(runs, spec)).toBe(renderFigure(runs, spec));
  });
});

describe("cli", () => {
  it("single-figure mode writes the file and re-runs byte-identically", () => {
    const root = makeSweep();
    const out = path.join(root, "fig.svg");
    const rc = main(["--glob", path.join(root, "*", "metrics.csv"),
      "--type", "curve", "--metric", "l1_exact", "--x", "iteration",
      "--group-by", "backward,lr", "--out", out]);
    expect(rc).toBe(0);
    const first = readFileSync(out);
    main(["--glob", path.join(root, "*", "metrics.csv"), "--type", "curve",
      "--metric", "l1_exact", "--x", "iteration", "--group-by", "backward,lr",
      "--out", out]);
    expect(readFileSync(out).equals(first)).toBe(true);
  });

  it("spec-file mode renders several figures", () => {
    const root = makeSweep();
    const spec = [
      { glob: path.join(root, "*", "metrics.csv"), type: "curve",
        metric: "l1_exact", out: path.join(root, "a.svg") },
      { glob: path.join(root, "*", "metrics.csv"), type: "steps",
        metric: "modes_found", x: "trajectories_sampled",
        out: path.join(root, "b.svg") },
      { glob: path.join(root, "*", "metrics.csv"), type: "bars",
        metric: "spearman", groupBy: ["lr"], out: path.join(root, "c.svg") },
    ];
    const sf = path.join(root, "figs.json");
    writeFileSync(sf, JSON.stringify(spec));
    expect(main(["--spec", sf])).toBe(0);
    for (const f of ["a.svg", "b.svg", "c.svg"]) {
      expect(readFileSync(path.join(root, f), "utf8")).toContain("<svg");
    }
  });

  it("fails with a clear message on empty globs and missing columns", () => {
    const root = makeSweep();
    expect(main(["--glob", path.join(root, "zzz*", "metrics.csv"), "--type",
      "curve", "--metric", "l1_exact", "--out", path.join(root, "x.svg")])).toBe(1);
    expect(main(["--glob", path.join(root, "*", "metrics.csv"), "--type",
      "curve", "--metric", "wat", "--out", path.join(root, "x.svg")])).toBe(1);
  });

  it("rejects png with a clear message", () => {
    const root = makeSweep();
    expect(main(["--glob", path.join(root, "*", "metrics.csv"), "--type",
      "curve", "--metric", "l1_exact", "--format", "png",
      "--out", path.join(root, "x.png")])).toBe(1);
  });
});

describe("svg helpers", () => {
  it("formats ticks compactly and deterministically", () => {
    expect(fmt(0)).toBe("0");
    expect(fmt(0.5)).toBe("0.5");
    expect(fmt(20000)).toBe("20000");
    expect(fmt(1e-4)).toBe("1.0e-4");
    expect(fmt(1234567)).toBe("1.2e6");
  });
});
