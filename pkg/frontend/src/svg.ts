/** Small SVG assembly helpers; everything renders to a plain string. */

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function rect(
  x: number,
  y: number,
  w: number,
  h: number,
  fill: string,
  extra = "",
): string {
  return `<rect x="${x}" y="${y}" width="${w}" height="${h}" fill="${fill}"${extra ? " " + extra : ""}/>`;
}

export function text(x: number, y: number, content: string, attrs = ""): string {
  return `<text x="${x}" y="${y}" ${attrs}>${esc(content)}</text>`;
}

export function polyline(points: Array<[number, number]>, stroke: string, close: boolean): string {
  const d =
    points.map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(4)},${y.toFixed(4)}`).join(" ") +
    (close ? " Z" : "");
  return `<path d="${d}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`;
}

export function document(
  width: number,
  height: number,
  body: string[],
  rootAttrs = "",
): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11"${rootAttrs ? " " + rootAttrs : ""}>\n` +
    body.join("\n") +
    "\n</svg>\n"
  );
}

export interface LegendEntry {
  label: string;
  color: string;
  count: number;
}

export function legend(x: number, y: number, entries: LegendEntry[]): string {
  const parts: string[] = [];
  entries.forEach((e, i) => {
    const cy = y + i * 18;
    parts.push(rect(x, cy, 12, 12, e.color, 'stroke="#444" stroke-width="0.5"'));
    parts.push(text(x + 18, cy + 10, `${e.label} (${e.count})`));
  });
  return parts.join("\n");
}
