import { readFileSync } from "fs";

export interface Table {
  header: string[];
  rows: number[][];
}

export function parseCsv(text: string): Table {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error("empty csv");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((ln) => ln.split(",").map(Number));
  return { header, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Column accessor with an explicit diagnostic naming what is missing. */
export function col(t: Table, name: string): number[] {
  const i = t.header.indexOf(name);
  if (i < 0) {
    throw new Error(
      `schema mismatch: column '${name}' not found; have [${t.header.join(", ")}]`,
    );
  }
  return t.rows.map((r) => r[i]);
}
