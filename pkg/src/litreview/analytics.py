"""Static tables and temporal series over consolidated labels: single/combo
label frequencies, per-class occurrence proportions, the symmetric chord
co-occurrence matrix, and cumulative evolution series.

The engine emits raw counts and plain proportions; log scaling and styling
are presentation concerns left to renderers.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

from .citenet import CitationGraph
from .taxonomy import AnswerMode, TaxonomyDimension

LabelSets = dict[str, frozenset[str]]


def format_percent(proportion: float) -> str:
    return f"{proportion * 100:.2f}%"


def rollup_labels(finals_labels: LabelSets, dimension: TaxonomyDimension) -> LabelSets:
    """Map subclass-index label sets to their top-level class sets (as
    strings). Non-subclass dimensions pass through unchanged."""
    if dimension.answer_mode is not AnswerMode.SUBCLASS_INDEXED:
        return dict(finals_labels)
    mapping = dimension.rollup_map()
    return {pid: frozenset(str(mapping[l]) for l in labels)
            for pid, labels in finals_labels.items()}


@dataclass
class FrequencyTable:
    """Exclusive single-label counts plus full-combination counts for
    multi-label papers. Combinations under the threshold are kept internally
    but omitted from the report."""

    dimension_id: str
    single_label_counts: dict[str, int]
    combination_counts: dict[tuple[str, ...], int]
    min_combination_count: int
    denominator: int

    def reported_combinations(self) -> list[tuple[tuple[str, ...], int]]:
        items = [(c, n) for c, n in self.combination_counts.items()
                 if n >= self.min_combination_count]
        return sorted(items, key=lambda kv: (-kv[1], kv[0]))

    def reported_singles(self) -> list[tuple[str, int]]:
        return sorted(self.single_label_counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_dict(self) -> dict:
        return {
            "dimension_id": self.dimension_id,
            "single_label_counts": dict(sorted(self.single_label_counts.items())),
            "combination_counts": {" + ".join(c): n for c, n
                                   in sorted(self.combination_counts.items())},
            "min_combination_count": self.min_combination_count,
            "denominator": self.denominator,
        }

    def to_csv(self) -> str:
        lines = ["kind,labels,count"]
        for label, n in self.reported_singles():
            lines.append(f"single,{label},{n}")
        for combo, n in self.reported_combinations():
            lines.append(f"combination,{' + '.join(combo)},{n}")
        return "\n".join(lines)


def label_frequency(finals_labels: LabelSets, dimension_id: str,
                    min_combination_count: int = 10) -> FrequencyTable:
    """Papers with exactly one label count under that label; papers with two
    or more count once under their full sorted combination."""
    singles: dict[str, int] = defaultdict(int)
    combos: dict[tuple[str, ...], int] = defaultdict(int)
    for labels in finals_labels.values():
        if len(labels) == 1:
            singles[next(iter(labels))] += 1
        elif labels:
            combos[tuple(sorted(labels))] += 1
    return FrequencyTable(
        dimension_id=dimension_id,
        single_label_counts=dict(singles),
        combination_counts=dict(combos),
        min_combination_count=min_combination_count,
        denominator=len(finals_labels),
    )


@dataclass(frozen=True)
class OccurrenceRow:
    label: str
    occurrence: int
    proportion: float

    @property
    def percent(self) -> str:
        return format_percent(self.proportion)

    def to_dict(self) -> dict:
        return {"label": self.label, "occurrence": self.occurrence,
                "proportion": self.proportion, "percent": self.percent}


def occurrence_proportions(class_sets: LabelSets,
                           classes: list[str] | None = None) -> list[OccurrenceRow]:
    """Occurrence = papers whose set contains the class; proportion is over
    the analyzed subset and need not sum to 1 (multi-label)."""
    denominator = len(class_sets)
    counts: dict[str, int] = defaultdict(int)
    for labels in class_sets.values():
        for label in labels:
            counts[label] += 1
    keys = classes if classes is not None else sorted(counts, key=_class_order)
    return [OccurrenceRow(label=c, occurrence=counts.get(c, 0),
                          proportion=counts.get(c, 0) / denominator if denominator else 0.0)
            for c in keys]


def _class_order(label: str):
    return (0, int(label)) if label.isdigit() else (1, label)


@dataclass
class CooccurrenceMatrix:
    """Symmetric pair counts with per-class occurrence on the diagonal."""

    classes: list[str]
    matrix: list[list[int]]
    denominator: int

    def count(self, a: str, b: str) -> int:
        ia, ib = self.classes.index(a), self.classes.index(b)
        return self.matrix[ia][ib]

    def to_dict(self) -> dict:
        return {"classes": list(self.classes),
                "matrix": [list(row) for row in self.matrix],
                "denominator": self.denominator}

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.classes)]
        for cls, row in zip(self.classes, self.matrix):
            lines.append(cls + "," + ",".join(str(v) for v in row))
        return "\n".join(lines)


def cooccurrence_matrix(class_sets: LabelSets,
                        classes: list[str] | None = None) -> CooccurrenceMatrix:
    if classes is None:
        observed = sorted({l for ls in class_sets.values() for l in ls}, key=_class_order)
        classes = observed
    index = {c: i for i, c in enumerate(classes)}
    n = len(classes)
    matrix = [[0] * n for _ in range(n)]
    for labels in class_sets.values():
        present = sorted((l for l in labels if l in index), key=_class_order)
        for l in present:
            matrix[index[l]][index[l]] += 1
        for a, b in combinations(present, 2):
            matrix[index[a]][index[b]] += 1
            matrix[index[b]][index[a]] += 1
    return CooccurrenceMatrix(classes=list(classes), matrix=matrix,
                              denominator=len(class_sets))


@dataclass
class TemporalSeries:
    """Cumulative count per year for one label pair, carried forward over
    the whole year range."""

    key: tuple[str, ...]
    ordered: bool
    points: dict[int, int] = field(default_factory=dict)

    @property
    def label(self) -> str:
        sep = " -> " if self.ordered else " & "
        return sep.join(self.key)

    @property
    def year_range(self) -> tuple[int, int]:
        years = sorted(self.points)
        return (years[0], years[-1]) if years else (0, 0)

    def final_value(self) -> int:
        return self.points[max(self.points)] if self.points else 0

    def to_dict(self) -> dict:
        return {"key": list(self.key), "ordered": self.ordered,
                "label": self.label,
                "points": [[y, self.points[y]] for y in sorted(self.points)]}


def _accumulate(increments: dict[tuple[str, ...], dict[int, int]], ordered: bool,
                year_range: tuple[int, int] | None) -> list[TemporalSeries]:
    out = []
    for key in sorted(increments):
        incs = increments[key]
        lo, hi = year_range if year_range else (min(incs), max(incs))
        series = TemporalSeries(key=key, ordered=ordered)
        running = 0
        for year in range(lo, hi + 1):
            running += incs.get(year, 0)
            series.points[year] = running
        out.append(series)
    return out


def cumulative_cooccurrence_series(class_sets: LabelSets, years: dict[str, int],
                                   pair_filter: set[tuple[str, str]] | None = None
                                   ) -> list[TemporalSeries]:
    """For every unordered class pair a paper carries, add one at the paper's
    publication year, then accumulate. Papers with three or more classes
    contribute to every pair they contain."""
    increments: dict[tuple[str, ...], dict[int, int]] = defaultdict(lambda: defaultdict(int))
    observed_years = []
    for pid, labels in class_sets.items():
        year = years.get(pid)
        if year is None:
            continue
        observed_years.append(year)
        for a, b in combinations(sorted(labels, key=_class_order), 2):
            pair = (a, b)
            if pair_filter is not None and pair not in pair_filter:
                continue
            increments[pair][year] += 1
    if not increments:
        return []
    year_range = (min(observed_years), max(observed_years))
    return _accumulate(increments, ordered=False, year_range=year_range)


@dataclass
class CrossCitationSeries:
    series: list[TemporalSeries]
    skipped_edges: int


def cumulative_cross_citation_series(graph: CitationGraph, dimension_id: str,
                                     pair_filter: set[tuple[str, str]] | None = None
                                     ) -> CrossCitationSeries:
    """For each edge u->v with both endpoints labeled, every ordered class
    pair (a in classes(u), b in classes(v)) gains one at the CITING paper's
    year. Edges with an unlabeled endpoint are skipped and counted."""
    increments: dict[tuple[str, ...], dict[int, int]] = defaultdict(lambda: defaultdict(int))
    skipped = 0
    observed_years = []
    for u, v in sorted(graph.edges):
        cu = graph.labels_of(u, dimension_id)
        cv = graph.labels_of(v, dimension_id)
        year = graph.node_years.get(u)
        if not cu or not cv or year is None:
            skipped += 1
            continue
        observed_years.append(year)
        for a in sorted(cu, key=_class_order):
            for b in sorted(cv, key=_class_order):
                pair = (a, b)
                if pair_filter is not None and pair not in pair_filter:
                    continue
                increments[pair][year] += 1
    if not increments:
        return CrossCitationSeries([], skipped)
    year_range = (min(observed_years), max(observed_years))
    return CrossCitationSeries(_accumulate(increments, ordered=True, year_range=year_range),
                               skipped)


def series_to_long_csv(series: list[TemporalSeries]) -> str:
    """Long-format rows: pair, year, cumulative_count."""
    lines = ["pair,year,cumulative_count"]
    for s in series:
        for year in sorted(s.points):
            lines.append(f"{s.label},{year},{s.points[year]}")
    return "\n".join(lines)


def figure_bundles(chord: CooccurrenceMatrix,
                   cooccurrence: list[TemporalSeries],
                   citations: CrossCitationSeries) -> dict:
    """Per-figure plot-data bundles for renderers."""
    return {
        "fig4": chord.to_dict(),
        "fig5": {"series": [s.to_dict() for s in cooccurrence]},
        "fig6": {"series": [s.to_dict() for s in citations.series],
                 "skipped_edges": citations.skipped_edges},
    }
