#!/usr/bin/env node
/**
 * Render harness CSV outputs to SVG.
 *
 *   zonofd-plot plot --kind grid-heatmap     --in grid.csv            --out grid.svg [--method m] [--bins 1,6,11,26,41]
 *   zonofd-plot plot --kind comparison-grid  --in compare.csv         --out cmp.svg
 *   zonofd-plot plot --kind residual-frames  --in p0.csv p1.csv ...   --out frame.svg
 *
 * Inputs are read-only; exit code 0 on success, 1 on schema/usage errors.
 */

import { writeFileSync } from "fs";
import { basename } from "path";

import { DETECTION_BINS, binsFromEdges } from "./bins.js";
import { readCompareCsv, readGridCsv, readPolygonCsv } from "./csv.js";
import { renderComparisonGrid } from "./comparison.js";
import { renderResidualFrames } from "./frames.js";
import { renderGridHeatmap } from "./heatmap.js";

interface Args {
  kind: string;
  inputs: string[];
  out: string;
  bins?: string;
  method?: string;
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== "plot") throw new Error("usage: zonofd-plot plot --kind <k> --in <csv...> --out <img>");
  const args: Args = { kind: "", inputs: [], out: "" };
  let i = 1;
  while (i < argv.length) {
    const flag = argv[i];
    if (flag === "--kind") {
      args.kind = argv[++i];
    } else if (flag === "--in") {
      i += 1;
      while (i < argv.length && !argv[i].startsWith("--")) {
        args.inputs.push(argv[i]);
        i += 1;
      }
      continue;
    } else if (flag === "--out") {
      args.out = argv[++i];
    } else if (flag === "--bins") {
      args.bins = argv[++i];
    } else if (flag === "--method") {
      args.method = argv[++i];
    } else {
      throw new Error(`unknown flag '${flag}'`);
    }
    i += 1;
  }
  if (!args.kind || args.inputs.length === 0 || !args.out) {
    throw new Error("plot needs --kind, --in and --out");
  }
  return args;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    const bins = args.bins ? binsFromEdges(args.bins) : DETECTION_BINS;
    let rendered: string;
    if (args.kind === "grid-heatmap") {
      const rows = readGridCsv(args.inputs[0]);
      rendered = renderGridHeatmap(rows, bins, args.method).svg;
    } else if (args.kind === "comparison-grid") {
      const rows = readCompareCsv(args.inputs[0]);
      rendered = renderComparisonGrid(rows).svg;
    } else if (args.kind === "residual-frames") {
      const polys = args.inputs.map((p) => readPolygonCsv(p));
      const labels = args.inputs.map((p) => basename(p, ".csv"));
      rendered = renderResidualFrames(polys, labels).svg;
    } else {
      throw new Error(`unknown kind '${args.kind}' (grid-heatmap | comparison-grid | residual-frames)`);
    }
    writeFileSync(args.out, rendered);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(basename(process.argv[1]));
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
