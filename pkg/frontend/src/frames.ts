/** Residual-zonotope outlines for one time step, with the origin marked. */

import { Polygon } from "./csv.js";
import * as svg from "./svg.js";

const SIZE = 420;
const PAD = 40;

const MODE_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

export interface FramesResult {
  svg: string;
  polygonCount: number;
}

export function renderResidualFrames(
  polygons: Polygon[],
  labels?: string[],
): FramesResult {
  if (polygons.length === 0) throw new Error("no polygons to render");
  let xs: number[] = [0];
  let ys: number[] = [0];
  for (const p of polygons) {
    xs = xs.concat(p.points.map((q) => q[0]));
    ys = ys.concat(p.points.map((q) => q[1]));
  }
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const span = Math.max(xMax - xMin, yMax - yMin, 1e-9);
  const scale = (SIZE - 2 * PAD) / span;
  const toPx = ([x, y]: [number, number]): [number, number] => [
    PAD + (x - xMin) * scale,
    SIZE - PAD - (y - yMin) * scale,
  ];

  const body: string[] = [];
  polygons.forEach((poly, i) => {
    const color = MODE_COLORS[i % MODE_COLORS.length];
    body.push(svg.polyline(poly.points.map(toPx), color, true));
    const name = labels?.[i] ?? `set ${i}`;
    body.push(svg.rect(SIZE - 130, PAD + i * 18, 12, 12, "none",
                       `stroke="${color}" stroke-width="1.5"`));
    body.push(svg.text(SIZE - 112, PAD + i * 18 + 10, name));
  });
  const [ox, oy] = toPx([0, 0]);
  body.push(`<line x1="${ox - 6}" y1="${oy}" x2="${ox + 6}" y2="${oy}" stroke="#000" stroke-width="1.2"/>`);
  body.push(`<line x1="${ox}" y1="${oy - 6}" x2="${ox}" y2="${oy + 6}" stroke="#000" stroke-width="1.2"/>`);
  body.push(svg.text(ox + 8, oy - 8, "origin"));
  const doc = svg.document(SIZE, SIZE, body, `data-polygons="${polygons.length}"`);
  return { svg: doc, polygonCount: polygons.length };
}
