/**
 * Detection-step bins and comparison categories, matching the harness's
 * classification exactly (the legend counts are cross-checked against the
 * scenario echo).
 */

export interface DetectionBin {
  label: string;
  lo: number;
  hi: number | null; // null = open upper end (still below the sentinel)
  color: string;
}

/** Default bins: 1 step, 2-6, 7-11, 12-26, 27-41, 42 and more, not detected. */
export const DETECTION_BINS: DetectionBin[] = [
  { label: "1", lo: 1, hi: 1, color: "#d62728" },
  { label: "2-6", lo: 2, hi: 6, color: "#ff8c1a" },
  { label: "7-11", lo: 7, hi: 11, color: "#f2d21f" },
  { label: "12-26", lo: 12, hi: 26, color: "#8ec9f0" },
  { label: "27-41", lo: 27, hi: 41, color: "#2455c3" },
  { label: "42+", lo: 42, hi: null, color: "#8f8f8f" },
];

export const NOT_DETECTED_LABEL = "none";
export const NOT_DETECTED_COLOR = "#efefef";

export function binLabels(bins: DetectionBin[]): string[] {
  return [...bins.map((b) => b.label), NOT_DETECTED_LABEL];
}

/** Bins from a comma list of inclusive upper edges, e.g. "1,6,11,26,41". */
export function binsFromEdges(spec: string): DetectionBin[] {
  const edges = spec.split(",").map((s) => Number.parseInt(s.trim(), 10));
  if (edges.length === 0 || edges.some((e) => !Number.isFinite(e))) {
    throw new Error(`invalid bin spec '${spec}'`);
  }
  for (let i = 1; i < edges.length; i++) {
    if (edges[i] <= edges[i - 1]) throw new Error(`bin edges must increase: '${spec}'`);
  }
  const palette = DETECTION_BINS.map((b) => b.color);
  const bins: DetectionBin[] = [];
  let lo = 1;
  edges.forEach((hi, i) => {
    bins.push({
      label: lo === hi ? `${lo}` : `${lo}-${hi}`,
      lo,
      hi,
      color: palette[Math.min(i, palette.length - 1)],
    });
    lo = hi + 1;
  });
  bins.push({ label: `${lo}+`, lo, hi: null, color: palette[palette.length - 1] });
  return bins;
}

/** Classify one detection step; `sentinel` (or anything above the horizon) means not detected. */
export function binFor(step: number, sentinel: number, bins: DetectionBin[]): string {
  if (step >= sentinel) return NOT_DETECTED_LABEL;
  for (const b of bins) {
    if (step >= b.lo && (b.hi === null || step <= b.hi)) return b.label;
  }
  return NOT_DETECTED_LABEL;
}

export function binColor(label: string, bins: DetectionBin[]): string {
  if (label === NOT_DETECTED_LABEL) return NOT_DETECTED_COLOR;
  const bin = bins.find((b) => b.label === label);
  return bin ? bin.color : NOT_DETECTED_COLOR;
}

/** The four comparison categories of the joint-vs-passive experiment. */
export const COMPARE_CATEGORIES = ["pfd-faster", "equal", "pfd-slower", "pfd-fails"] as const;
export type CompareCategory = (typeof COMPARE_CATEGORIES)[number];

export const COMPARE_COLORS: Record<CompareCategory, string> = {
  "pfd-faster": "#d62728",
  equal: "#f2d21f",
  "pfd-slower": "#2ca02c",
  "pfd-fails": "#2455c3",
};
