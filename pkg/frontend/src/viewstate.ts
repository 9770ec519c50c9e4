// View state lives in the URL so sessions are shareable: serializing and
// restoring reproduces the identical rendered view for unchanged server
// state. Secrets (API token) never enter the URL.

export type ViewName = "annotate" | "prompts" | "explore" | "query";
export type Measure = "in_degree" | "pagerank" | "betweenness";
export type EvolutionKind = "cooccurrence" | "citation";

export interface LabelConstraint {
  dimension: string;
  label: string;
  include: boolean;
}

export interface ViewState {
  view: ViewName;
  dimension: string;
  models: string[];
  yearFrom: number | null;
  yearTo: number | null;
  keyword: string;
  constraints: LabelConstraint[];
  measure: Measure;
  topK: number;
  logScale: boolean;
  evolutionKind: EvolutionKind;
  paperIndex: number;
}

export const DEFAULT_VIEW_STATE: ViewState = {
  view: "annotate",
  dimension: "pricing_model",
  models: [],
  yearFrom: null,
  yearTo: null,
  keyword: "",
  constraints: [],
  measure: "pagerank",
  topK: 10,
  logScale: true,
  evolutionKind: "cooccurrence",
  paperIndex: 0,
};

const VIEWS: ViewName[] = ["annotate", "prompts", "explore", "query"];
const MEASURES: Measure[] = ["in_degree", "pagerank", "betweenness"];

export function encodeViewState(state: ViewState): string {
  const params = new URLSearchParams();
  const d = DEFAULT_VIEW_STATE;
  if (state.view !== d.view) params.set("view", state.view);
  if (state.dimension !== d.dimension) params.set("dim", state.dimension);
  if (state.models.length) params.set("models", state.models.join(","));
  if (state.yearFrom !== null) params.set("from", String(state.yearFrom));
  if (state.yearTo !== null) params.set("to", String(state.yearTo));
  if (state.keyword) params.set("q", state.keyword);
  for (const c of state.constraints) {
    params.append("label", `${c.dimension}:${c.include ? "" : "!"}${c.label}`);
  }
  if (state.measure !== d.measure) params.set("measure", state.measure);
  if (state.topK !== d.topK) params.set("k", String(state.topK));
  if (state.logScale !== d.logScale) params.set("log", state.logScale ? "1" : "0");
  if (state.evolutionKind !== d.evolutionKind) params.set("evo", state.evolutionKind);
  if (state.paperIndex !== d.paperIndex) params.set("i", String(state.paperIndex));
  return params.toString();
}

export function decodeViewState(search: string): ViewState {
  const params = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  const state: ViewState = { ...DEFAULT_VIEW_STATE, constraints: [], models: [] };
  const view = params.get("view");
  if (view && (VIEWS as string[]).includes(view)) state.view = view as ViewName;
  const dim = params.get("dim");
  if (dim) state.dimension = dim;
  const models = params.get("models");
  if (models) state.models = models.split(",").filter(Boolean);
  const from = params.get("from");
  if (from !== null && !Number.isNaN(Number(from))) state.yearFrom = Number(from);
  const to = params.get("to");
  if (to !== null && !Number.isNaN(Number(to))) state.yearTo = Number(to);
  state.keyword = params.get("q") ?? "";
  for (const raw of params.getAll("label")) {
    const colon = raw.indexOf(":");
    if (colon < 1) continue;
    const dimension = raw.slice(0, colon);
    let label = raw.slice(colon + 1);
    const include = !label.startsWith("!");
    if (!include) label = label.slice(1);
    if (label) state.constraints.push({ dimension, label, include });
  }
  const measure = params.get("measure");
  if (measure && (MEASURES as string[]).includes(measure)) state.measure = measure as Measure;
  const k = params.get("k");
  if (k !== null && Number(k) >= 1) state.topK = Math.floor(Number(k));
  const log = params.get("log");
  if (log !== null) state.logScale = log !== "0";
  const evo = params.get("evo");
  if (evo === "cooccurrence" || evo === "citation") state.evolutionKind = evo;
  const index = params.get("i");
  if (index !== null && Number(index) >= 0) state.paperIndex = Math.floor(Number(index));
  return state;
}
