// Side-by-side metric bundle comparison for the evaluation loop. Values are
// rendered exactly as fetched; only formatting happens here.

import type { MetricBundlePayload } from "./types";

export interface MetricColumn {
  key: string;
  label: string;
  get: (b: MetricBundlePayload) => number | null;
}

export const METRIC_COLUMNS: MetricColumn[] = [
  { key: "accuracy_avg", label: "Avg accuracy", get: (b) => b.accuracy_avg },
  { key: "f1_avg", label: "Avg F1", get: (b) => b.f1_avg },
  { key: "self_consistency", label: "Self-consistency", get: (b) => b.self_consistency },
  { key: "jaccard_mean", label: "Mean Jaccard", get: (b) => b.jaccard_mean },
  { key: "lenient_accuracy", label: "Lenient accuracy", get: (b) => b.lenient_accuracy },
  { key: "micro_precision", label: "Micro P", get: (b) => b.micro?.precision ?? null },
  { key: "micro_recall", label: "Micro R", get: (b) => b.micro?.recall ?? null },
  { key: "micro_f1", label: "Micro F1", get: (b) => b.micro?.f1 ?? null },
  { key: "sample_precision", label: "Sample P", get: (b) => b.sample?.precision ?? null },
  { key: "sample_recall", label: "Sample R", get: (b) => b.sample?.recall ?? null },
  { key: "sample_f1", label: "Sample F1", get: (b) => b.sample?.f1 ?? null },
];

export function visibleColumns(bundles: MetricBundlePayload[]): MetricColumn[] {
  return METRIC_COLUMNS.filter((c) => bundles.some((b) => c.get(b) !== null));
}

export function formatMetric(value: number | null): string {
  return value === null ? "–" : value.toFixed(4);
}

/** Per-column difference a - b for every metric both bundles define. */
export function bundleDelta(a: MetricBundlePayload, b: MetricBundlePayload):
    Record<string, number> {
  const delta: Record<string, number> = {};
  for (const column of METRIC_COLUMNS) {
    const va = column.get(a);
    const vb = column.get(b);
    if (va !== null && vb !== null) delta[column.key] = va - vb;
  }
  return delta;
}

export function bundleKey(b: MetricBundlePayload): string {
  return `${b.model_name} v${b.prompt_version}`;
}
