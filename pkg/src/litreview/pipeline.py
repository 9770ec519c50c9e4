"""End-to-end developer-mode flow: classify all dimensions over a corpus,
consolidate, gate, and derive the network and trend outputs.

The machine-readable result bundle deliberately contains no timestamps or
latencies, so two executions over the same corpus and scripted provider are
byte-identical when serialized with sorted keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime

from . import analytics, citenet
from .classifier import Finals, GateReport, RunSet, consolidate, gate_positive, run_dimension
from .corpus import Corpus
from .gateway import Gateway
from .store import Store
from .taxonomy import AnswerMode, Taxonomy

GATE_DIMENSION = "pricing_model"


@dataclass
class PipelineResult:
    run_sets: dict[str, RunSet] = field(default_factory=dict)
    finals: dict[str, Finals] = field(default_factory=dict)
    gate: GateReport | None = None
    frequency: dict[str, analytics.FrequencyTable] = field(default_factory=dict)
    occurrence: list[analytics.OccurrenceRow] = field(default_factory=list)
    chord: analytics.CooccurrenceMatrix | None = None
    cooccurrence_series: list[analytics.TemporalSeries] = field(default_factory=list)
    citation_series: analytics.CrossCitationSeries | None = None
    graph: citenet.CitationGraph | None = None
    gate_subgraph: citenet.CitationGraph | None = None
    centralities: dict[str, citenet.CentralityScores] = field(default_factory=dict)
    top10: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def machine_outputs(self) -> dict:
        """Deterministic output bundle (no timestamps, no latencies)."""
        out: dict = {
            "finals": {d: f.to_dict() for d, f in self.finals.items()},
            "gate": self.gate.to_dict() if self.gate else None,
            "frequency": {d: t.to_dict() for d, t in self.frequency.items()},
            "occurrence": [r.to_dict() for r in self.occurrence],
            "chord": self.chord.to_dict() if self.chord else None,
            "cooccurrence_series": [s.to_dict() for s in self.cooccurrence_series],
            "citation_series": {
                "series": [s.to_dict() for s in self.citation_series.series],
                "skipped_edges": self.citation_series.skipped_edges,
            } if self.citation_series else None,
            "resolution_stats": self.graph.resolution_stats.to_dict()
            if self.graph and self.graph.resolution_stats else None,
            "gate_subgraph_edges": sorted(list(e) for e in self.gate_subgraph.edges)
            if self.gate_subgraph else [],
            "centralities": {m: s.to_dict() for m, s in self.centralities.items()},
            "top10": {m: [[pid, score] for pid, score in ranked]
                      for m, ranked in self.top10.items()},
        }
        # assignments without timestamps, for reproducible comparison
        out["assignments"] = {
            d: [{k: v for k, v in a.to_dict().items() if k != "produced_at"}
                for a in rs.assignments]
            for d, rs in self.run_sets.items()
        }
        return out

    def machine_json(self) -> str:
        return json.dumps(self.machine_outputs(), sort_keys=True, indent=1)


def run_full_pipeline(corpus: Corpus, taxonomy: Taxonomy, gateway: Gateway,
                      repetitions: int = 1, *,
                      min_combination_count: int = 10,
                      now: datetime | None = None,
                      store: Store | None = None,
                      top_k: int = 10) -> PipelineResult:
    """Classify every dimension (gate first), then derive every table,
    matrix, series, and centrality ranking. Persists artifacts when a store
    is given."""
    result = PipelineResult()
    papers = sorted(corpus, key=lambda r: r.paper_id)
    years = {p.paper_id: p.year for p in papers}

    gate_dim = taxonomy.dimension(GATE_DIMENSION)
    gate_runs = run_dimension(papers, gate_dim, gateway, repetitions, now=now)
    gate_finals = consolidate(gate_runs, gate_dim)
    result.run_sets[GATE_DIMENSION] = gate_runs
    result.finals[GATE_DIMENSION] = gate_finals
    result.gate = gate_positive(papers, gate_finals)
    positive_papers = [corpus.get(pid) for pid in result.gate.positives]

    for dim in taxonomy:
        if dim.dimension_id == GATE_DIMENSION:
            continue
        subset = positive_papers if dim.depends_on == GATE_DIMENSION else papers
        runs = run_dimension(subset, dim, gateway, repetitions, now=now)
        result.run_sets[dim.dimension_id] = runs
        result.finals[dim.dimension_id] = consolidate(runs, dim)

    # frequency tables for every non-gate dimension; class-level for rollups
    class_sets = None
    subclass_dim = None
    for dim in taxonomy:
        if dim.dimension_id == GATE_DIMENSION:
            continue
        finals = result.finals[dim.dimension_id]
        if dim.answer_mode is AnswerMode.SUBCLASS_INDEXED:
            subclass_dim = dim
            class_sets = analytics.rollup_labels(finals.labels, dim)
            table_labels = class_sets
        else:
            table_labels = finals.labels
        result.frequency[dim.dimension_id] = analytics.label_frequency(
            table_labels, dim.dimension_id, min_combination_count)

    if class_sets is not None and subclass_dim is not None:
        all_classes = sorted({str(c) for c in subclass_dim.rollup_map().values()},
                             key=int)
        result.occurrence = analytics.occurrence_proportions(class_sets, all_classes)
        result.chord = analytics.cooccurrence_matrix(class_sets, all_classes)
        result.cooccurrence_series = analytics.cumulative_cooccurrence_series(
            class_sets, years)

    graph = citenet.resolve_references(corpus)
    graph.attach_labels(GATE_DIMENSION, gate_finals.labels,
                        vocabulary=frozenset(gate_dim.valid_labels()))
    if class_sets is not None and subclass_dim is not None:
        class_vocab = frozenset(str(c) for c in subclass_dim.rollup_map().values())
        graph.attach_labels(subclass_dim.dimension_id, class_sets, vocabulary=class_vocab)
    result.graph = graph

    sub = citenet.induce_category_subgraph(graph, GATE_DIMENSION, "Yes")
    result.gate_subgraph = sub
    if sub.nodes:
        result.centralities["in_degree"] = citenet.in_degree_centrality(sub)
        result.centralities["pagerank"] = citenet.pagerank(sub)
        result.centralities["betweenness"] = citenet.betweenness_centrality(sub)
        for measure, scores in result.centralities.items():
            result.top10[measure] = citenet.top_k(scores, top_k, sub.node_years)
        if subclass_dim is not None:
            result.citation_series = analytics.cumulative_cross_citation_series(
                sub, subclass_dim.dimension_id)

    if store is not None:
        store.put("corpus", corpus.corpus_id, corpus)
        store.put("graph", corpus.corpus_id, graph)
        for dim_id, rs in result.run_sets.items():
            store.put("run_set", rs.run_set_id, rs)
        for dim_id, fin in result.finals.items():
            store.put("finals", dim_id, fin)
    return result
