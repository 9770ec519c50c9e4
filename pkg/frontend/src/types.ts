// Payload shapes mirroring the service's JSON responses.

export interface PaperRow {
  paper_id: string;
  title: string;
  year: number;
  abstract: string;
  authors: string[];
  source_title: string;
  final_labels: Record<string, string[]>;
}

export interface PapersPage {
  total: number;
  papers: PaperRow[];
}

export interface DimensionSummary {
  dimension_id: string;
  name: string;
  answer_mode: "binary" | "labeled_multi" | "subclass_indexed" | "text_mapped";
  depends_on: string | null;
  labels: string[];
  valid_labels: string[];
  prompt_version: number | null;
}

export interface TaxonomyIndex {
  dimensions: DimensionSummary[];
}

export interface PromptTemplate {
  version: number;
  preamble: string;
  constraints: string[];
  output_format_instruction: string;
}

export interface PromptVersions {
  dimension_id: string;
  versions: PromptTemplate[];
  edits: { version: number; editor: string; edited_at: string }[];
}

export interface GoldRecord {
  paper_id: string;
  dimension_id: string;
  labels: string[];
  annotator: string;
  annotated_at: string | null;
}

export interface GoldSetPayload {
  dimension_id: string;
  records: GoldRecord[];
}

export interface JobInfo {
  job_id: string;
  identity: string;
  dimension_id: string;
  model_name: string;
  prompt_version: number;
  repetitions: number;
  status: "pending" | "running" | "completed" | "cancelled" | "failed";
  progress: { done: number; total: number };
  error: string;
}

export interface PrfPayload {
  precision: number | null;
  recall: number | null;
  f1: number | null;
  undefined_terms: number;
}

export interface MetricBundlePayload {
  dimension_id: string;
  model_name: string;
  prompt_version: number;
  n_samples: number;
  accuracy_avg: number | null;
  f1_avg: number | null;
  self_consistency: number | null;
  jaccard_mean: number | null;
  lenient_accuracy: number | null;
  micro: PrfPayload | null;
  sample: PrfPayload | null;
}

export interface EvaluationsPayload {
  dimension_id: string;
  bundles: MetricBundlePayload[];
  comparison: {
    dimension_id: string;
    sort_key: string;
    rows: Record<string, number | string | null>[];
    deltas: Record<string, number | string>[];
  };
  table_text: string;
}

export interface CentralityRow {
  paper_id: string;
  score: number;
  title: string | null;
  year: number | null;
}

export interface CentralityPayload {
  measure: string;
  rows: CentralityRow[];
  parameters: Record<string, unknown>;
}

export interface ChordPayload {
  classes: string[];
  matrix: number[][];
  denominator: number;
}

export interface FrequencyPayload {
  dimension_id: string;
  single_label_counts: Record<string, number>;
  combination_counts: Record<string, number>;
  min_combination_count: number;
  denominator: number;
}

export interface OccurrencePayload {
  dimension_id: string;
  denominator: number;
  rows: { label: string; occurrence: number; proportion: number; percent: string }[];
}

export interface SeriesPayload {
  key: string[];
  ordered: boolean;
  label: string;
  points: [number, number][];
}

export interface EvolutionPayload {
  kind: "cooccurrence" | "citation";
  series: SeriesPayload[];
  skipped_edges?: number;
}
