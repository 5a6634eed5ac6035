/** Detection-time heatmap over an input grid, one colored square per cell. */

import {
  DetectionBin,
  NOT_DETECTED_LABEL,
  binColor,
  binFor,
  binLabels,
} from "./bins.js";
import { GridRow } from "./csv.js";
import * as svg from "./svg.js";

const CELL = 26;
const MARGIN = 56;
const LEGEND_W = 120;

export interface HeatmapResult {
  svg: string;
  binCounts: Record<string, number>;
  n: number;
}

export function renderGridHeatmap(
  rows: GridRow[],
  bins: DetectionBin[],
  method?: string,
  sentinel?: number,
): HeatmapResult {
  const methods = [...new Set(rows.map((r) => r.method))];
  const chosen = method ?? methods[0];
  if (!methods.includes(chosen)) {
    throw new Error(`method '${chosen}' not present (have: ${methods.join(", ")})`);
  }
  const cells = rows.filter((r) => r.method === chosen);
  const axis1 = [...new Set(cells.map((r) => r.u1))].sort((a, b) => a - b);
  const axis2 = [...new Set(cells.map((r) => r.u2))].sort((a, b) => a - b);
  if (cells.length !== axis1.length * axis2.length) {
    throw new Error(
      `grid is not complete: ${cells.length} cells for ${axis1.length}x${axis2.length} axes`,
    );
  }
  // the sentinel is horizon + 1; infer it as one past the largest in-horizon step
  const sent = sentinel ?? Math.max(...cells.map((r) => r.step));
  const counts: Record<string, number> = {};
  for (const label of binLabels(bins)) counts[label] = 0;

  const body: string[] = [];
  for (const cell of cells) {
    const i = axis1.indexOf(cell.u1);
    const j = axis2.indexOf(cell.u2);
    const label = binFor(cell.step, sent, bins);
    counts[label] += 1;
    const x = MARGIN + i * CELL;
    const y = MARGIN + (axis2.length - 1 - j) * CELL;
    body.push(
      svg.rect(x + 1, y + 1, CELL - 2, CELL - 2, binColor(label, bins),
               `data-bin="${label}" data-step="${cell.step}"`),
    );
  }
  for (let i = 0; i < axis1.length; i += Math.max(1, Math.floor(axis1.length / 7))) {
    body.push(svg.text(MARGIN + i * CELL + 2, MARGIN + axis2.length * CELL + 14,
                       axis1[i].toFixed(2)));
  }
  for (let j = 0; j < axis2.length; j += Math.max(1, Math.floor(axis2.length / 7))) {
    body.push(svg.text(8, MARGIN + (axis2.length - 1 - j) * CELL + 16, axis2[j].toFixed(2)));
  }
  body.push(svg.text(MARGIN, MARGIN - 28, `detection step by input (${chosen})`,
                     'font-size="13" font-weight="bold"'));
  body.push(svg.text(MARGIN, MARGIN - 12, `bins in steps; '${NOT_DETECTED_LABEL}' = not detected`));
  const entries = binLabels(bins).map((label) => ({
    label,
    color: binColor(label, bins),
    count: counts[label],
  }));
  body.push(svg.legend(MARGIN + axis1.length * CELL + 16, MARGIN, entries));

  const width = MARGIN + axis1.length * CELL + LEGEND_W + 40;
  const height = MARGIN + axis2.length * CELL + 40;
  const doc = svg.document(width, height, body,
                           `data-bin-counts='${JSON.stringify(counts)}'`);
  return { svg: doc, binCounts: counts, n: axis1.length };
}
