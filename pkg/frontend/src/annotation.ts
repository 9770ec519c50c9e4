// Annotation workspace logic: label toggling, submission validation (label
// sets are never empty; the sentinel is suggested instead), progress, and
// keyboard-only operation.

import type { DimensionSummary, GoldSetPayload } from "./types";

export interface SubmissionCheck {
  ok: boolean;
  error?: string;
  suggestion?: string;
}

export function sentinelOf(dimension: DimensionSummary): string | null {
  const byName = dimension.labels.find((l) => l.toLowerCase() === "not specified");
  if (byName) return byName;
  if (dimension.answer_mode === "subclass_indexed") {
    return dimension.valid_labels[dimension.valid_labels.length - 1] ?? null;
  }
  return null;
}

export function checkSubmission(labels: string[], dimension: DimensionSummary): SubmissionCheck {
  if (labels.length === 0) {
    const sentinel = sentinelOf(dimension);
    return {
      ok: false,
      error: "label set must not be empty",
      suggestion: sentinel ?? undefined,
    };
  }
  if (dimension.answer_mode === "binary" && labels.length > 1) {
    return { ok: false, error: "binary dimensions take exactly one label" };
  }
  const valid = new Set(dimension.valid_labels);
  const bad = labels.filter((l) => !valid.has(l));
  if (bad.length) {
    return { ok: false, error: `labels outside vocabulary: ${bad.join(", ")}` };
  }
  return { ok: true };
}

export function toggleLabel(selected: string[], label: string,
                            dimension: DimensionSummary): string[] {
  if (dimension.answer_mode === "binary") {
    return selected.includes(label) ? [] : [label];
  }
  return selected.includes(label)
    ? selected.filter((l) => l !== label)
    : [...selected, label];
}

export interface Progress {
  annotated: number;
  total: number;
  fraction: number;
}

export function annotationProgress(gold: GoldSetPayload, totalPapers: number): Progress {
  const annotated = new Set(gold.records.map((r) => r.paper_id)).size;
  return {
    annotated,
    total: totalPapers,
    fraction: totalPapers ? annotated / totalPapers : 0,
  };
}

export type KeyAction =
  | { kind: "toggle"; labelIndex: number }
  | { kind: "submit" }
  | { kind: "next" }
  | { kind: "prev" }
  | { kind: "none" };

/** Keyboard map: digits 1-9 toggle the nth label, Enter submits,
 * n/→ and p/← navigate. */
export function keyToAction(key: string, labelCount: number): KeyAction {
  if (/^[1-9]$/.test(key)) {
    const index = Number(key) - 1;
    return index < labelCount ? { kind: "toggle", labelIndex: index } : { kind: "none" };
  }
  if (key === "Enter") return { kind: "submit" };
  if (key === "n" || key === "ArrowRight") return { kind: "next" };
  if (key === "p" || key === "ArrowLeft") return { kind: "prev" };
  return { kind: "none" };
}
