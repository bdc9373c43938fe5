/** Reading the training-run file contract: metrics.csv + config.resolved. */

import { readFileSync, readdirSync, statSync } from "fs";
import * as path from "path";

export type Row = Record<string, number | null>;

export interface RunData {
  csvPath: string;
  columns: string[];
  rows: Row[];
  /** flattened config.resolved values as "section.key" -> string */
  config: Record<string, string>;
}

export function parseCsv(text: string): { columns: string[]; rows: Row[] } {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error("empty CSV");
  const columns = lines[0].split(",");
  const rows: Row[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    const row: Row = {};
    columns.forEach((c, i) => {
      const raw = cells[i] ?? "";
      row[c] = raw === "" ? null : Number(raw);
    });
    rows.push(row);
  }
  return { columns, rows };
}

/** Flat INI-style config: [section] headers, key = value lines. */
export function parseConfig(text: string): Record<string, string> {
  const out: Record<string, string> = {};
  let section = "";
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("#") || line.startsWith(";")) continue;
    const sec = line.match(/^\[(.+)\]$/);
    if (sec) {
      section = sec[1];
      continue;
    }
    const eq = line.indexOf("=");
    if (eq > 0) {
      const key = line.slice(0, eq).trim();
      out[section ? `${section}.${key}` : key] = line.slice(eq + 1).trim();
    }
  }
  return out;
}

/** Minimal glob over path segments: `*` within a segment, `**` across them. */
export function expandGlob(pattern: string): string[] {
  const abs = path.resolve(pattern);
  const segs = abs.split(path.sep).filter((s, i) => i === 0 || s.length > 0);
  const root = segs[0] === "" ? path.sep : segs[0] + path.sep;
  const results: string[] = [];

  const segRe = (seg: string) =>
    new RegExp("^" + seg.replace(/[.+^${}()|[\]\\]/g, "\\$&").replace(/\*/g, "[^/]*") + "$");

  const walk = (dir: string, rest: string[]): void => {
    if (rest.length === 0) {
      return;
    }
    const [head, ...tail] = rest;
    if (head === "**") {
      walk(dir, tail);
      let entries: string[] = [];
      try {
        entries = readdirSync(dir);
      } catch {
        return;
      }
      for (const e of entries.sort()) {
        const p = path.join(dir, e);
        try {
          if (statSync(p).isDirectory()) walk(p, rest);
        } catch {
          /* unreadable entry */
        }
      }
      return;
    }
    if (!head.includes("*")) {
      const p = path.join(dir, head);
      try {
        const st = statSync(p);
        if (tail.length === 0 && st.isFile()) results.push(p);
        else if (st.isDirectory()) walk(p, tail);
      } catch {
        /* missing */
      }
      return;
    }
    let entries: string[] = [];
    try {
      entries = readdirSync(dir);
    } catch {
      return;
    }
    const re = segRe(head);
    for (const e of entries.sort()) {
      if (!re.test(e)) continue;
      const p = path.join(dir, e);
      try {
        const st = statSync(p);
        if (tail.length === 0 && st.isFile()) results.push(p);
        else if (st.isDirectory()) walk(p, tail);
      } catch {
        /* race */
      }
    }
  };

  walk(root, segs.slice(1));
  return [...new Set(results)].sort();
}

/** Load one run: its CSV plus the sibling config.resolved (if present). */
export function loadRun(csvPath: string): RunData {
  const { columns, rows } = parseCsv(readFileSync(csvPath, "utf8"));
  let config: Record<string, string> = {};
  const cfgPath = path.join(path.dirname(csvPath), "config.resolved");
  try {
    config = parseConfig(readFileSync(cfgPath, "utf8"));
  } catch {
    /* standalone CSV without a run directory */
  }
  return { csvPath, columns, rows, config };
}

export function loadRuns(pattern: string): RunData[] {
  const files = expandGlob(pattern);
  if (files.length === 0) {
    throw new Error(`no CSV files match glob: ${pattern}`);
  }
  return files.map(loadRun);
}
