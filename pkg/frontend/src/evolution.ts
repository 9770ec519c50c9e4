// Chart geometry for cumulative evolution series. The log/linear toggle is
// a pure axis transform: the data points the server sent never change.

import type { SeriesPayload } from "./types";

export interface ChartPoint {
  year: number;
  value: number;
}

export function seriesPoints(series: SeriesPayload): ChartPoint[] {
  return series.points.map(([year, value]) => ({ year, value }));
}

/** Y coordinate mapper. Log axis uses log10 with zeros pinned to the
 * baseline (counts are non-negative integers). */
export function yScale(maxValue: number, height: number, log: boolean):
    (value: number) => number {
  if (log) {
    const top = Math.log10(Math.max(maxValue, 1));
    return (value: number) => {
      if (value <= 0) return height;
      if (top === 0) return 0;
      return height - (Math.log10(value) / top) * height;
    };
  }
  const top = Math.max(maxValue, 1);
  return (value: number) => height - (value / top) * height;
}

export function xScale(minYear: number, maxYear: number, width: number):
    (year: number) => number {
  const span = Math.max(maxYear - minYear, 1);
  return (year: number) => ((year - minYear) / span) * width;
}

export function chartExtents(series: SeriesPayload[]): {
  minYear: number; maxYear: number; maxValue: number;
} {
  let minYear = Infinity;
  let maxYear = -Infinity;
  let maxValue = 0;
  for (const s of series) {
    for (const [year, value] of s.points) {
      minYear = Math.min(minYear, year);
      maxYear = Math.max(maxYear, year);
      maxValue = Math.max(maxValue, value);
    }
  }
  if (!Number.isFinite(minYear)) {
    return { minYear: 0, maxYear: 0, maxValue: 0 };
  }
  return { minYear, maxYear, maxValue };
}

export function linePath(points: ChartPoint[], x: (year: number) => number,
                         y: (value: number) => number): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.year).toFixed(2)},${y(p.value).toFixed(2)}`)
    .join("");
}

export const SERIES_COLORS = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2",
  "#eeca3b", "#b279a2", "#9d755d", "#bab0ac", "#76b7b2",
];

export function seriesColor(index: number): string {
  return SERIES_COLORS[index % SERIES_COLORS.length];
}
