/** figures CLI: render training figures from run-directory CSVs.
 *
 * Either single-figure mode via flags:
 *   figures --glob 'runs/x/metrics.csv' --type curve --metric l1_exact \
 *           --x iteration --group-by backward,lr --out fig.svg
 * or batch mode via a JSON spec file (an array of figure specs):
 *   figures --spec figures.json
 */

import { readFileSync, writeFileSync } from "fs";
import { loadRuns } from "./csv.js";
import { FigureSpec, renderFigure } from "./figures.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (!a.startsWith("--")) throw new Error(`unexpected argument '${a}'`);
    const key = a.slice(2);
    const val = argv[i + 1];
    if (val === undefined || val.startsWith("--")) {
      out.set(key, "true");
    } else {
      out.set(key, val);
      i++;
    }
  }
  return out;
}

function specFromFlags(flags: Map<string, string>): FigureSpec {
  const need = (k: string): string => {
    const v = flags.get(k);
    if (v === undefined) throw new Error(`missing required flag --${k}`);
    return v;
  };
  const type = need("type");
  if (type !== "curve" && type !== "steps" && type !== "bars") {
    throw new Error(`--type must be curve|steps|bars, got '${type}'`);
  }
  return {
    glob: need("glob"),
    type,
    metric: need("metric"),
    x: flags.get("x") ?? "iteration",
    groupBy: (flags.get("group-by") ?? "backward,lr").split(",").filter(Boolean),
    out: need("out"),
    format: (flags.get("format") ?? "svg") as "svg" | "png",
    logy: flags.get("logy") === "true",
    title: flags.get("title"),
  };
}

function normalizeSpec(raw: Partial<FigureSpec>, index: number): FigureSpec {
  for (const k of ["glob", "type", "metric", "out"] as const) {
    if (raw[k] === undefined) throw new Error(`spec entry ${index}: missing '${k}'`);
  }
  return {
    x: "iteration",
    groupBy: ["backward", "lr"],
    format: "svg",
    ...raw,
  } as FigureSpec;
}

export function runOne(spec: FigureSpec): void {
  if (spec.format === "png") {
    throw new Error(
      "png output is not supported in this build (no rasterizer available); use svg");
  }
  const runs = loadRuns(spec.glob);
  const svg = renderFigure(runs, spec);
  writeFileSync(spec.out, svg);
  console.log(`wrote ${spec.out} (${spec.type}, ${runs.length} runs)`);
}

export function main(argv: string[]): number {
  try {
    const flags = parseArgs(argv);
    if (flags.has("spec")) {
      const raw = JSON.parse(readFileSync(flags.get("spec")!, "utf8"));
      const entries: Partial<FigureSpec>[] = Array.isArray(raw) ? raw : [raw];
      entries.forEach((entry, i) => runOne(normalizeSpec(entry, i)));
    } else {
      runOne(specFromFlags(flags));
    }
    return 0;
  } catch (err) {
    console.error(`figures: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(main(process.argv.slice(2)));
}
