"""In-corpus citation graph: reference resolution, label attachment, induced
category subnetworks, and centrality measures.

Reference strings resolve to corpus records first by contained DOI, then by
normalized-title containment with a publication-year check. Matches to two or
more candidates are ambiguous and dropped; resolution statistics expose the
quality of the necessarily heuristic matching.

Centralities are computed directly on adjacency dicts. Betweenness uses the
standard single-source accumulation with exact rational arithmetic by default,
so results are reproducible to the bit.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

from .corpus import Corpus, normalize_title


class GraphError(Exception):
    pass


@dataclass(frozen=True)
class ResolutionStats:
    references_total: int = 0
    resolved: int = 0
    ambiguous: int = 0
    unresolved: int = 0

    def to_dict(self) -> dict:
        return {"references_total": self.references_total, "resolved": self.resolved,
                "ambiguous": self.ambiguous, "unresolved": self.unresolved}

    @classmethod
    def from_dict(cls, d: dict) -> "ResolutionStats":
        return cls(**d)


@dataclass
class CitationGraph:
    """Directed graph of resolved citations (citer -> cited). No self-loops;
    edges are deduplicated. Label sets can be attached per dimension."""

    nodes: set[str] = field(default_factory=set)
    edges: set[tuple[str, str]] = field(default_factory=set)
    node_years: dict[str, int] = field(default_factory=dict)
    node_labels: dict[str, dict[str, frozenset[str]]] = field(default_factory=dict)
    label_universe: dict[str, frozenset[str]] = field(default_factory=dict)
    resolution_stats: ResolutionStats | None = None

    def add_edge(self, citer: str, cited: str) -> None:
        if citer == cited:
            return
        self.nodes.update((citer, cited))
        self.edges.add((citer, cited))

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {v: [] for v in self.nodes}
        for u, v in sorted(self.edges):
            succ[u].append(v)
        return succ

    def labels_of(self, node: str, dimension_id: str) -> frozenset[str]:
        return self.node_labels.get(node, {}).get(dimension_id, frozenset())

    def attach_labels(self, dimension_id: str, labels: dict[str, frozenset[str]],
                      vocabulary: frozenset[str] | None = None) -> None:
        """Attach per-node label sets for one dimension; nodes absent from
        the mapping simply stay unlabeled."""
        universe = set(vocabulary or ())
        for node, ls in labels.items():
            universe.update(ls)
            if node in self.nodes:
                self.node_labels.setdefault(node, {})[dimension_id] = frozenset(ls)
        self.label_universe[dimension_id] = frozenset(universe)

    def to_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": sorted(list(e) for e in self.edges),
            "node_years": dict(sorted(self.node_years.items())),
            "node_labels": {n: {d: sorted(ls) for d, ls in dims.items()}
                            for n, dims in sorted(self.node_labels.items())},
            "label_universe": {d: sorted(ls) for d, ls in sorted(self.label_universe.items())},
            "resolution_stats": self.resolution_stats.to_dict() if self.resolution_stats else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CitationGraph":
        g = cls(
            nodes=set(d.get("nodes", ())),
            edges={tuple(e) for e in d.get("edges", ())},
            node_years={k: int(v) for k, v in d.get("node_years", {}).items()},
            node_labels={n: {dim: frozenset(ls) for dim, ls in dims.items()}
                         for n, dims in d.get("node_labels", {}).items()},
            label_universe={dim: frozenset(ls) for dim, ls in d.get("label_universe", {}).items()},
        )
        if d.get("resolution_stats"):
            g.resolution_stats = ResolutionStats.from_dict(d["resolution_stats"])
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, CitationGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()


_DOI_RE = re.compile(r"10\.\d{4,9}/[^\s,;\"'<>]+", re.IGNORECASE)
_YEAR_RE = re.compile(r"\b(19\d{2}|20\d{2})\b")


def resolve_references(corpus: Corpus) -> CitationGraph:
    """Match every reference string against the corpus and build the graph.

    Total: never raises on bad strings; every string lands in exactly one of
    resolved / ambiguous / unresolved. A string matching its own citing paper
    counts as resolved but adds no self-loop edge.
    """
    graph = CitationGraph()
    graph.nodes.update(r.paper_id for r in corpus)
    graph.node_years.update({r.paper_id: r.year for r in corpus})

    doi_index: dict[str, list[str]] = defaultdict(list)
    for rec in corpus:
        if rec.doi:
            doi_index[rec.doi.lower().rstrip(".,;)")].append(rec.paper_id)

    # invert each title by its rarest word so candidate lookup is cheap
    word_freq: Counter[str] = Counter()
    norm_titles: dict[str, str] = {}
    for rec in corpus:
        norm = normalize_title(rec.title)
        norm_titles[rec.paper_id] = norm
        word_freq.update(set(norm.split()))
    rare_index: dict[str, list[str]] = defaultdict(list)
    for pid, norm in norm_titles.items():
        words = norm.split()
        if not words:
            continue
        rarest = min(words, key=lambda w: (word_freq[w], w))
        rare_index[rarest].append(pid)

    total = resolved = ambiguous = unresolved = 0
    for rec in corpus:
        for ref in rec.reference_strings:
            total += 1
            targets = _match_reference(ref, corpus, doi_index, rare_index, norm_titles)
            if len(targets) == 1:
                resolved += 1
                graph.add_edge(rec.paper_id, next(iter(targets)))
            elif len(targets) > 1:
                ambiguous += 1
            else:
                unresolved += 1
    graph.resolution_stats = ResolutionStats(total, resolved, ambiguous, unresolved)
    return graph


def _match_reference(ref: str, corpus: Corpus, doi_index, rare_index,
                     norm_titles) -> set[str]:
    for doi in _DOI_RE.findall(ref):
        hits = doi_index.get(doi.lower().rstrip(".,;)"))
        if hits:
            return set(hits)
    norm_ref = normalize_title(ref)
    ref_words = set(norm_ref.split())
    ref_years = {int(y) for y in _YEAR_RE.findall(ref)}
    candidates: set[str] = set()
    for word in ref_words:
        candidates.update(rare_index.get(word, ()))
    matches: set[str] = set()
    for pid in candidates:
        title = norm_titles[pid]
        if not title or f" {title} " not in f" {norm_ref} ":
            continue
        year = corpus.get(pid).year if corpus.get(pid) else None
        year_ok = year is not None and any(abs(y - year) <= 1 for y in ref_years)
        if len(title.split()) >= 5:
            if ref_years and not year_ok:
                continue
        elif not year_ok:
            continue
        matches.add(pid)
    return matches


def induce_category_subgraph(graph: CitationGraph, dimension_id: str,
                             label: str) -> CitationGraph:
    """Edges whose SOURCE carries the label; targets are kept regardless of
    their own labels; nodes without any kept edge are dropped."""
    if dimension_id not in graph.label_universe:
        raise GraphError(f"no labels attached for dimension {dimension_id!r}")
    if label not in graph.label_universe[dimension_id]:
        raise GraphError(f"unknown label {label!r} for dimension {dimension_id!r}")
    sub = CitationGraph()
    for u, v in sorted(graph.edges):
        if label in graph.labels_of(u, dimension_id):
            sub.add_edge(u, v)
    sub.node_years = {n: graph.node_years[n] for n in sub.nodes if n in graph.node_years}
    sub.node_labels = {n: dict(graph.node_labels[n]) for n in sub.nodes
                       if n in graph.node_labels}
    sub.label_universe = dict(graph.label_universe)
    return sub


@dataclass
class CentralityScores:
    measure: str
    scores: dict[str, float]
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"measure": self.measure,
                "scores": dict(sorted(self.scores.items())),
                "parameters": dict(self.parameters)}

    @classmethod
    def from_dict(cls, d: dict) -> "CentralityScores":
        return cls(d["measure"], dict(d["scores"]), dict(d.get("parameters", {})))


def in_degree_centrality(graph: CitationGraph, normalized: bool = False) -> CentralityScores:
    """Distinct in-edges per node (citations received). Pass normalized=True
    to divide by n-1."""
    scores = {v: 0.0 for v in graph.nodes}
    for _u, v in graph.edges:
        scores[v] += 1.0
    if normalized and len(graph.nodes) > 1:
        denom = len(graph.nodes) - 1
        scores = {v: s / denom for v, s in scores.items()}
    return CentralityScores("in_degree", scores, {"normalized": normalized})


def pagerank(graph: CitationGraph, damping: float = 0.85, tolerance: float = 1e-9,
             max_iterations: int = 100) -> CentralityScores:
    """Power iteration with uniform teleport; the mass of dangling nodes is
    redistributed uniformly each step. Stops when the L1 change drops below
    tolerance, reporting whether it converged."""
    if not graph.nodes:
        raise GraphError("pagerank is undefined on an empty graph")
    nodes = sorted(graph.nodes)
    n = len(nodes)
    succ = graph.successors()
    out_deg = {v: len(succ[v]) for v in nodes}
    preds: dict[str, list[str]] = {v: [] for v in nodes}
    for u, v in sorted(graph.edges):
        preds[v].append(u)
    x = {v: 1.0 / n for v in nodes}
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        dangling = sum(x[v] for v in nodes if out_deg[v] == 0)
        base = (1.0 - damping) / n + damping * dangling / n
        new = {}
        for v in nodes:
            new[v] = base + damping * sum(x[u] / out_deg[u] for u in preds[v])
        change = sum(abs(new[v] - x[v]) for v in nodes)
        x = new
        if change < tolerance:
            converged = True
            break
    return CentralityScores("pagerank", x, {
        "damping": damping, "tolerance": tolerance,
        "max_iterations": max_iterations,
        "iterations": iterations, "converged": converged,
    })


def betweenness_centrality(graph: CitationGraph, exact: bool = True) -> CentralityScores:
    """Directed, unweighted shortest-path betweenness (endpoints excluded),
    via single-source path counting with dependency back-propagation.

    exact=True accumulates dependencies as rationals; set it False for large
    graphs where float accumulation is enough.
    """
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    nodes = sorted(graph.nodes)
    succ = graph.successors()
    btw = {v: zero for v in nodes}
    for s in nodes:
        stack: list[str] = []
        preds: dict[str, list[str]] = {v: [] for v in nodes}
        sigma = {v: 0 for v in nodes}
        dist = {v: -1 for v in nodes}
        sigma[s] = 1
        dist[s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            stack.append(u)
            for v in succ[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
                if dist[v] == dist[u] + 1:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        delta = {v: zero for v in nodes}
        for w in reversed(stack):
            for u in preds[w]:
                share = (Fraction(sigma[u], sigma[w]) if exact else sigma[u] / sigma[w])
                delta[u] += share * (one + delta[w])
            if w != s:
                btw[w] += delta[w]
    return CentralityScores("betweenness",
                            {v: float(btw[v]) for v in nodes},
                            {"exact": exact, "directed": True})


def top_k(scores: CentralityScores, k: int,
          years: dict[str, int] | None = None) -> list[tuple[str, float]]:
    """Descending by score; ties broken by ascending year then paper id."""
    if k < 1:
        raise GraphError("k must be >= 1")
    years = years or {}
    ranked = sorted(scores.scores.items(),
                    key=lambda kv: (-kv[1], years.get(kv[0], 10**9), kv[0]))
    return ranked[:k]


def export_edge_list(graph: CitationGraph) -> str:
    """One 'citing_id,cited_id' per line, sorted."""
    return "\n".join(f"{u},{v}" for u, v in sorted(graph.edges))


def export_node_attributes(graph: CitationGraph) -> str:
    """One 'paper_id,year,dim=label|label;dim=...' per line, sorted."""
    lines = []
    for n in sorted(graph.nodes):
        year = graph.node_years.get(n, "")
        dims = graph.node_labels.get(n, {})
        label_part = ";".join(f"{d}={'|'.join(sorted(ls))}" for d, ls in sorted(dims.items()))
        lines.append(f"{n},{year},{label_part}")
    return "\n".join(lines)
