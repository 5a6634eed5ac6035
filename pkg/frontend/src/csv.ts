/** Minimal CSV reading for the harness outputs (plain comma-separated, header row). */

import { readFileSync } from "fs";

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error("empty CSV");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`CSV row has ${row.length} fields, header has ${header.length}`);
    }
  }
  return { header, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

export function column(table: Table, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new Error(`CSV is missing column '${name}'`);
  return idx;
}

export interface GridRow {
  u1: number;
  u2: number;
  method: string;
  step: number;
}

export function readGridCsv(path: string): GridRow[] {
  const t = readCsv(path);
  const [u1, u2, method, step] = ["u1", "u2", "method", "detection-step"].map((n) =>
    column(t, n),
  );
  return t.rows.map((r) => ({
    u1: Number(r[u1]),
    u2: Number(r[u2]),
    method: r[method],
    step: Number.parseInt(r[step], 10),
  }));
}

export interface CompareRow {
  u1: number;
  u2: number;
  pfdStep: number;
  afdStep: number;
  category: string;
}

export function readCompareCsv(path: string): CompareRow[] {
  const t = readCsv(path);
  const [u1, u2, p, a, c] = ["u1", "u2", "pfd-step", "afd-step", "category"].map((n) =>
    column(t, n),
  );
  return t.rows.map((r) => ({
    u1: Number(r[u1]),
    u2: Number(r[u2]),
    pfdStep: Number.parseInt(r[p], 10),
    afdStep: Number.parseInt(r[a], 10),
    category: r[c],
  }));
}

export interface Polygon {
  /** Vertices without the repeated closing vertex. */
  points: Array<[number, number]>;
  closed: boolean;
}

export function readPolygonCsv(path: string): Polygon {
  const t = readCsv(path);
  const [x, y] = ["x", "y"].map((n) => column(t, n));
  const pts = t.rows.map((r) => [Number(r[x]), Number(r[y])] as [number, number]);
  if (pts.length === 0) throw new Error(`polygon file ${path} has no vertices`);
  const first = pts[0];
  const last = pts[pts.length - 1];
  const closed = first[0] === last[0] && first[1] === last[1];
  return { points: closed && pts.length > 1 ? pts.slice(0, -1) : pts, closed };
}
