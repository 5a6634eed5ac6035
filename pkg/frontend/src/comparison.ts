/** Four-category comparison grid: joint design vs per-cell passive runs. */

import { COMPARE_CATEGORIES, COMPARE_COLORS, CompareCategory } from "./bins.js";
import { CompareRow } from "./csv.js";
import * as svg from "./svg.js";

const CELL = 26;
const MARGIN = 56;
const LEGEND_W = 150;

export interface ComparisonResult {
  svg: string;
  categoryCounts: Record<string, number>;
}

export function renderComparisonGrid(rows: CompareRow[]): ComparisonResult {
  const axis1 = [...new Set(rows.map((r) => r.u1))].sort((a, b) => a - b);
  const axis2 = [...new Set(rows.map((r) => r.u2))].sort((a, b) => a - b);
  if (rows.length !== axis1.length * axis2.length) {
    throw new Error(
      `comparison grid is not complete: ${rows.length} cells for ${axis1.length}x${axis2.length}`,
    );
  }
  const counts: Record<string, number> = {};
  for (const cat of COMPARE_CATEGORIES) counts[cat] = 0;
  const body: string[] = [];
  for (const row of rows) {
    if (!(COMPARE_CATEGORIES as readonly string[]).includes(row.category)) {
      throw new Error(`unknown category '${row.category}'`);
    }
    counts[row.category] += 1;
    const i = axis1.indexOf(row.u1);
    const j = axis2.indexOf(row.u2);
    const x = MARGIN + i * CELL;
    const y = MARGIN + (axis2.length - 1 - j) * CELL;
    body.push(
      svg.rect(x + 1, y + 1, CELL - 2, CELL - 2,
               COMPARE_COLORS[row.category as CompareCategory],
               `data-category="${row.category}"`),
    );
  }
  const afdStep = rows[0]?.afdStep;
  body.push(svg.text(MARGIN, MARGIN - 28, "passive grid vs joint design",
                     'font-size="13" font-weight="bold"'));
  body.push(svg.text(MARGIN, MARGIN - 12, `joint-design isolation step: ${afdStep}`));
  const entries = COMPARE_CATEGORIES.map((cat) => ({
    label: cat,
    color: COMPARE_COLORS[cat],
    count: counts[cat],
  }));
  body.push(svg.legend(MARGIN + axis1.length * CELL + 16, MARGIN, entries));
  const width = MARGIN + axis1.length * CELL + LEGEND_W + 40;
  const height = MARGIN + axis2.length * CELL + 40;
  const doc = svg.document(width, height, body,
                           `data-category-counts='${JSON.stringify(counts)}'`);
  return { svg: doc, categoryCounts: counts };
}
