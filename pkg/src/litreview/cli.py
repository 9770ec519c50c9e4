"""Operator CLI covering the developer-mode pipeline without the UI.

Every command performs one module operation family and prints a
machine-parseable summary (--output machine gives stable JSON). Exit codes:
0 ok, 3 corpus/input errors, 4 not found, 5 version conflict, 6 taxonomy
errors, 7 provider/gateway errors, 1 anything else.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import analytics, citenet
from .classifier import Finals, RunSet, consolidate as consolidate_runs, gate_positive, run_dimension, run_set_identity
from .corpus import Corpus, CorpusError
from .evaluation import GoldLabelSet, GoldSet, compare_models, evaluate_dimension
from .gateway import GatewayError
from .pipeline import GATE_DIMENSION
from .service import ProviderSpec, ServiceConfig
from .store import NotFoundError, Store, StoreError, VersionConflict, QueryFilter, query_papers
from .taxonomy import (Taxonomy, TaxonomyError, builtin_option_pricing_taxonomy,
                       load_taxonomy_file)

EXIT_CODES = [
    (CorpusError, 3),
    (NotFoundError, 4),
    (VersionConflict, 5),
    (TaxonomyError, 6),
    (GatewayError, 7),
    (StoreError, 1),
]


def _fail(e: Exception) -> None:
    for etype, code in EXIT_CODES:
        if isinstance(e, etype):
            click.echo(f"error: {e}", err=True)
            sys.exit(code)
    click.echo(f"error: {e}", err=True)
    sys.exit(1)


def _emit(ctx, payload: dict, text: str | None = None) -> None:
    if ctx.obj["output"] == "machine":
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(text if text is not None else
                   " ".join(f"{k}={v}" for k, v in payload.items()))


def _store(ctx, create: bool = True) -> Store:
    root = ctx.obj["store"]
    if not root:
        _fail(StoreError("no store root: pass --store or set LITREVIEW_STORE"))
    return Store(root, create=create)


def _taxonomy(store: Store) -> Taxonomy:
    if store.exists("taxonomy", "main"):
        return store.get("taxonomy", "main")
    taxonomy = builtin_option_pricing_taxonomy()
    store.put("taxonomy", "main", taxonomy)
    return taxonomy


def _corpus(store: Store, corpus_id: str) -> Corpus:
    return store.get("corpus", corpus_id)


@click.group()
@click.option("--store", envvar="LITREVIEW_STORE", default=None,
              help="Store root directory (or LITREVIEW_STORE).")
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="Service/provider config JSON.")
@click.option("--output", type=click.Choice(["text", "machine"]), default="text")
@click.pass_context
def main(ctx, store, config_path, output):
    """Literature-review engine: ingest, classify, evaluate, analyze."""
    ctx.ensure_object(dict)
    ctx.obj["store"] = store
    ctx.obj["config_path"] = config_path
    ctx.obj["output"] = output


@main.command()
@click.option("--file", "file_path", required=True, type=click.Path())
@click.option("--profile", default="scopus_csv", show_default=True)
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def ingest(ctx, file_path, profile, corpus_id):
    """Ingest an export file into the corpus."""
    try:
        store = _store(ctx)
        corpus = _corpus(store, corpus_id) if store.exists("corpus", corpus_id) \
            else Corpus(corpus_id)
        delta = corpus.ingest_export(file_path, profile)
        store.put("corpus", corpus_id, corpus)
        _emit(ctx, {"added": len(delta.added), "updated": len(delta.updated),
                    "rejected": len(delta.rejected),
                    "duplicates_merged": delta.duplicates_merged,
                    "corpus_size": len(corpus)},
              text=delta.summary() + f" corpus_size={len(corpus)}")
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--file", "file_path", required=True, type=click.Path())
@click.option("--profile", default="scopus_csv", show_default=True)
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def update(ctx, file_path, profile, corpus_id):
    """Merge a newer export into the existing corpus (idempotent)."""
    try:
        store = _store(ctx)
        corpus = _corpus(store, corpus_id)
        delta = corpus.merge_update(file_path, profile)
        store.put("corpus", corpus_id, corpus)
        _emit(ctx, {"added": len(delta.added), "updated": len(delta.updated),
                    "rejected": len(delta.rejected),
                    "duplicates_merged": delta.duplicates_merged,
                    "empty_delta": delta.is_empty()},
              text=delta.summary())
    except Exception as e:
        _fail(e)


@main.group()
def taxonomy():
    """Inspect and edit classification dimensions."""


@taxonomy.command("show")
@click.option("--dim", "dim_id", default=None)
@click.pass_context
def taxonomy_show(ctx, dim_id):
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        if dim_id:
            d = t.dimension(dim_id)
            _emit(ctx, d.to_dict(), text=yaml_of_dimension(d))
        else:
            rows = [{"dimension_id": d.dimension_id, "answer_mode": d.answer_mode.value,
                     "labels": len(d.labels),
                     "prompt_version": d.prompt_template.version if d.prompt_template else None}
                    for d in t]
            _emit(ctx, {"dimensions": rows},
                  text="\n".join(f"{r['dimension_id']}\t{r['answer_mode']}\t"
                                 f"labels={r['labels']}\tprompt_v={r['prompt_version']}"
                                 for r in rows))
    except Exception as e:
        _fail(e)


def yaml_of_dimension(d) -> str:
    import yaml as _yaml
    return _yaml.safe_dump(d.to_dict(), sort_keys=False, allow_unicode=True)


@taxonomy.command("edit")
@click.option("--dim", "dim_id", required=True)
@click.option("--constraints-file", required=True, type=click.Path(exists=True),
              help="Text file with one constraint line per row.")
@click.option("--editor", default=lambda: os.environ.get("USER", "cli"))
@click.pass_context
def taxonomy_edit(ctx, dim_id, constraints_file, editor):
    """Replace the constraint lines of a dimension (new prompt version)."""
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        lines = [l.rstrip("\n") for l in Path(constraints_file).read_text("utf-8").splitlines()
                 if l.strip()]
        template = t.edit_constraints(dim_id, lines, editor)
        store.put("taxonomy", "main", t)
        _emit(ctx, {"dimension_id": dim_id, "prompt_version": template.version,
                    "constraints": len(template.constraints)})
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--dimension", "dim_id", required=True)
@click.option("--model", "model_name", default=None)
@click.option("--repetitions", "-r", default=1, show_default=True)
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def classify(ctx, dim_id, model_name, repetitions, corpus_id):
    """Run a classification dimension over the corpus (resumable)."""
    try:
        store = _store(ctx)
        if not ctx.obj["config_path"]:
            _fail(StoreError("classify needs --config with a provider"))
        config = ServiceConfig.from_file(ctx.obj["config_path"])
        spec = config.provider_for(model_name)
        t = _taxonomy(store)
        dim = t.dimension(dim_id)
        corpus = _corpus(store, corpus_id)
        if dim.depends_on:
            gate_finals: Finals = store.get("finals", dim.depends_on)
            report = gate_positive(list(corpus), gate_finals)
            papers = [corpus.get(pid) for pid in report.positives]
        else:
            papers = sorted(corpus, key=lambda r: r.paper_id)
        identity = run_set_identity(dim_id, spec.config.model_name,
                                    dim.prompt_template.version if dim.prompt_template else 0)
        existing = store.get("run_set", identity) if store.exists("run_set", identity) else None
        run_set = run_dimension(papers, dim, spec.build_gateway(), repetitions,
                                existing=existing)
        store.put("run_set", identity, run_set)
        _emit(ctx, {"run_set": identity, "targets": len(run_set.targets),
                    "assignments": len(run_set.assignments),
                    "coverage": run_set.coverage})
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--dimension", "dim_id", required=True)
@click.option("--model", "model_name", default=None,
              help="Model whose run set to consolidate (default: only one present).")
@click.pass_context
def consolidate(ctx, dim_id, model_name):
    """Collapse a run set into final labels and report the gate share."""
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        dim = t.dimension(dim_id)
        candidates = []
        for rs_id in sorted(store.list_ids("run_set")):
            rs: RunSet = store.get("run_set", rs_id)
            if rs.dimension_id == dim_id and (model_name is None or rs.model_name == model_name):
                candidates.append(rs)
        if not candidates:
            raise NotFoundError(f"no run set stored for {dim_id}")
        run_set = candidates[-1]
        finals = consolidate_runs(run_set, dim)
        store.put("finals", dim_id, finals)
        payload = {"dimension_id": dim_id, "papers": len(finals.labels),
                   "unclassified": len(finals.unclassified)}
        if dim.dimension_id == GATE_DIMENSION:
            corpus = _corpus(store, "main")
            report = gate_positive(list(corpus), finals)
            payload.update({"positives": report.count, "total": report.total,
                            "percent": report.percent})
        _emit(ctx, payload)
    except Exception as e:
        _fail(e)


@main.group()
def gold():
    """Manage human gold labels."""


@gold.command("add")
@click.option("--dimension", "dim_id", required=True)
@click.option("--paper", "paper_id", required=True)
@click.option("--labels", required=True, help="Comma-separated label list.")
@click.option("--annotator", default=lambda: os.environ.get("USER", "cli"))
@click.pass_context
def gold_add(ctx, dim_id, paper_id, labels, annotator):
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        dim = t.dimension(dim_id)
        label_set = frozenset(l.strip() for l in labels.split(",") if l.strip())
        bad = label_set - set(dim.valid_labels())
        if bad:
            raise TaxonomyError(f"labels outside vocabulary: {', '.join(sorted(bad))}")
        gs = store.get("gold_set", dim_id) if store.exists("gold_set", dim_id) \
            else GoldSet(dimension_id=dim_id)
        from datetime import datetime, timezone
        replaced = gs.upsert(GoldLabelSet(paper_id=paper_id, dimension_id=dim_id,
                                          labels=label_set, annotator=annotator,
                                          annotated_at=datetime.now(timezone.utc)))
        store.put("gold_set", dim_id, gs)
        _emit(ctx, {"dimension_id": dim_id, "paper_id": paper_id,
                    "replaced": replaced, "annotated": len(gs.records)})
    except Exception as e:
        _fail(e)


@gold.command("show")
@click.option("--dimension", "dim_id", required=True)
@click.pass_context
def gold_show(ctx, dim_id):
    try:
        store = _store(ctx)
        gs: GoldSet = store.get("gold_set", dim_id)
        _emit(ctx, gs.to_dict(),
              text="\n".join(f"{r.paper_id}\t{','.join(sorted(r.labels))}\t{r.annotator}"
                             for r in gs.records))
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--dimension", "dim_id", required=True)
@click.option("--model", "model_name", default=None)
@click.pass_context
def evaluate(ctx, dim_id, model_name):
    """Compute the metric bundle(s) for stored run sets against gold labels."""
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        dim = t.dimension(dim_id)
        gold_set: GoldSet = store.get("gold_set", dim_id)
        bundles = []
        for rs_id in sorted(store.list_ids("run_set")):
            rs: RunSet = store.get("run_set", rs_id)
            if rs.dimension_id != dim_id:
                continue
            if model_name and rs.model_name != model_name:
                continue
            bundles.append(evaluate_dimension(dim, rs, gold_set))
        if not bundles:
            raise NotFoundError(f"no run sets to evaluate for {dim_id}")
        comparison = compare_models(bundles)
        _emit(ctx, {"dimension_id": dim_id,
                    "bundles": [b.to_dict() for b in bundles],
                    "comparison": comparison.to_dict()},
              text=comparison.to_text())
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--measure", type=click.Choice(["in_degree", "pagerank", "betweenness"]),
              default="pagerank", show_default=True)
@click.option("--top", "k", default=10, show_default=True)
@click.option("--dimension", "dim_id", default=None, help="Induce subgraph on this dimension.")
@click.option("--label", default=None, help="Label the subgraph sources must carry.")
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def network(ctx, measure, k, dim_id, label, corpus_id):
    """Centrality ranking over the resolved citation graph."""
    try:
        store = _store(ctx)
        corpus = _corpus(store, corpus_id)
        graph = citenet.resolve_references(corpus)
        t = _taxonomy(store)
        for dim in t:
            if store.exists("finals", dim.dimension_id):
                fin: Finals = store.get("finals", dim.dimension_id)
                labels = analytics.rollup_labels(fin.labels, dim)
                vocab = frozenset(str(c) for c in dim.rollup_map().values()) \
                    if dim.rollup_map() else frozenset(dim.valid_labels())
                graph.attach_labels(dim.dimension_id, labels, vocabulary=vocab)
        if dim_id and label:
            graph = citenet.induce_category_subgraph(graph, dim_id, label)
        if measure == "in_degree":
            scores = citenet.in_degree_centrality(graph)
        elif measure == "pagerank":
            scores = citenet.pagerank(graph)
        else:
            scores = citenet.betweenness_centrality(graph)
        ranked = citenet.top_k(scores, k, graph.node_years)
        _emit(ctx, {"measure": measure,
                    "rows": [[pid, score] for pid, score in ranked],
                    "parameters": scores.parameters},
              text="\n".join(f"{pid}\t{score:.4f}" for pid, score in ranked))
    except Exception as e:
        _fail(e)


@main.group(name="analytics")
def analytics_group():
    """Frequency tables, chord matrix, and evolution series."""


def _class_sets(store: Store, t: Taxonomy):
    from .taxonomy import AnswerMode
    for dim in t:
        if dim.answer_mode is AnswerMode.SUBCLASS_INDEXED and store.exists("finals", dim.dimension_id):
            fin: Finals = store.get("finals", dim.dimension_id)
            return analytics.rollup_labels(fin.labels, dim), dim
    raise NotFoundError("no consolidated subclass dimension found")


@analytics_group.command("frequency")
@click.option("--dimension", "dim_id", required=True)
@click.option("--min-count", default=10, show_default=True)
@click.option("--rolled", is_flag=True, help="Roll subclasses up to classes first.")
@click.pass_context
def analytics_frequency(ctx, dim_id, min_count, rolled):
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        dim = t.dimension(dim_id)
        fin: Finals = store.get("finals", dim_id)
        labels = analytics.rollup_labels(fin.labels, dim) if rolled else fin.labels
        table = analytics.label_frequency(labels, dim_id, min_count)
        _emit(ctx, table.to_dict(), text=table.to_csv())
    except Exception as e:
        _fail(e)


@analytics_group.command("occurrence")
@click.pass_context
def analytics_occurrence(ctx):
    try:
        store = _store(ctx)
        class_sets, dim = _class_sets(store, _taxonomy(store))
        classes = sorted({str(c) for c in dim.rollup_map().values()}, key=int)
        rows = analytics.occurrence_proportions(class_sets, classes)
        _emit(ctx, {"denominator": len(class_sets), "rows": [r.to_dict() for r in rows]},
              text="\n".join(f"{r.label}\t{r.occurrence}\t{r.percent}" for r in rows))
    except Exception as e:
        _fail(e)


@analytics_group.command("chord")
@click.pass_context
def analytics_chord(ctx):
    try:
        store = _store(ctx)
        class_sets, dim = _class_sets(store, _taxonomy(store))
        classes = sorted({str(c) for c in dim.rollup_map().values()}, key=int)
        matrix = analytics.cooccurrence_matrix(class_sets, classes)
        _emit(ctx, matrix.to_dict(), text=matrix.to_csv())
    except Exception as e:
        _fail(e)


@analytics_group.command("evolution")
@click.option("--kind", type=click.Choice(["cooccurrence", "citation"]),
              default="cooccurrence", show_default=True)
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def analytics_evolution(ctx, kind, corpus_id):
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        class_sets, dim = _class_sets(store, t)
        if kind == "cooccurrence":
            corpus = _corpus(store, corpus_id)
            years = {r.paper_id: r.year for r in corpus}
            series = analytics.cumulative_cooccurrence_series(class_sets, years)
            payload = {"kind": kind, "series": [s.to_dict() for s in series]}
            _emit(ctx, payload, text=analytics.series_to_long_csv(series))
        else:
            corpus = _corpus(store, corpus_id)
            graph = citenet.resolve_references(corpus)
            graph.attach_labels(dim.dimension_id, class_sets,
                                vocabulary=frozenset(str(c) for c in dim.rollup_map().values()))
            if store.exists("finals", GATE_DIMENSION):
                gate_finals: Finals = store.get("finals", GATE_DIMENSION)
                graph.attach_labels(GATE_DIMENSION, gate_finals.labels,
                                    vocabulary=frozenset({"Yes", "No"}))
                graph = citenet.induce_category_subgraph(graph, GATE_DIMENSION, "Yes")
            result = analytics.cumulative_cross_citation_series(graph, dim.dimension_id)
            _emit(ctx, {"kind": kind, "skipped_edges": result.skipped_edges,
                        "series": [s.to_dict() for s in result.series]},
                  text=analytics.series_to_long_csv(result.series))
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--year-from", type=int, default=None)
@click.option("--year-to", type=int, default=None)
@click.option("--keyword", default=None)
@click.option("--label", "labels", multiple=True,
              help="dim:label to require, dim:!label to exclude; repeatable.")
@click.option("--limit", default=20, show_default=True)
@click.option("--offset", default=0)
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.pass_context
def papers(ctx, year_from, year_to, keyword, labels, limit, offset, corpus_id):
    """Query the labeled corpus."""
    try:
        store = _store(ctx)
        corpus = _corpus(store, corpus_id)
        finals = {d: store.get("finals", d) for d in store.list_ids("finals")}
        constraints = []
        for item in labels:
            dim_id, lab = item.split(":", 1)
            constraints.append((dim_id, lab.lstrip("!"), not lab.startswith("!")))
        qf = QueryFilter(year_range=(year_from, year_to) if year_from or year_to else None,
                         label_constraints=constraints, keyword=keyword,
                         limit=limit, offset=offset)
        result = query_papers(corpus, finals, qf)
        _emit(ctx, result.to_dict(),
              text="\n".join(f"{p['paper_id']}\t{p['year']}\t{p['title']}"
                             for p in result.papers) + f"\ntotal={result.total}")
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--corpus", "corpus_id", default="main", show_default=True)
@click.option("--min-count", default=10, show_default=True)
@click.pass_context
def export(ctx, out_dir, corpus_id, min_count):
    """Write every table, matrix, series, and centrality ranking to files."""
    try:
        store = _store(ctx)
        t = _taxonomy(store)
        corpus = _corpus(store, corpus_id)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        finals = {d: store.get("finals", d) for d in store.list_ids("finals")}
        for dim in t:
            fin = finals.get(dim.dimension_id)
            if fin is None or dim.dimension_id == GATE_DIMENSION:
                continue
            labels = analytics.rollup_labels(fin.labels, dim)
            table = analytics.label_frequency(labels, dim.dimension_id, min_count)
            path = out / f"frequency_{dim.dimension_id}.csv"
            path.write_text(table.to_csv() + "\n", "utf-8")
            written.append(path.name)

        try:
            class_sets, subclass_dim = _class_sets(store, t)
        except NotFoundError:
            class_sets, subclass_dim = None, None
        graph = citenet.resolve_references(corpus)
        if store.exists("finals", GATE_DIMENSION):
            gate_finals = finals[GATE_DIMENSION]
            graph.attach_labels(GATE_DIMENSION, gate_finals.labels,
                                vocabulary=frozenset({"Yes", "No"}))
        if class_sets is not None:
            classes = sorted({str(c) for c in subclass_dim.rollup_map().values()}, key=int)
            matrix = analytics.cooccurrence_matrix(class_sets, classes)
            (out / "chord.csv").write_text(matrix.to_csv() + "\n", "utf-8")
            written.append("chord.csv")
            years = {r.paper_id: r.year for r in corpus}
            series = analytics.cumulative_cooccurrence_series(class_sets, years)
            (out / "evolution_cooccurrence.csv").write_text(
                analytics.series_to_long_csv(series) + "\n", "utf-8")
            written.append("evolution_cooccurrence.csv")
            graph.attach_labels(subclass_dim.dimension_id, class_sets,
                                vocabulary=frozenset(classes))
            sub = citenet.induce_category_subgraph(graph, GATE_DIMENSION, "Yes") \
                if GATE_DIMENSION in graph.label_universe else graph
            cites = analytics.cumulative_cross_citation_series(sub, subclass_dim.dimension_id)
            (out / "evolution_citation.csv").write_text(
                analytics.series_to_long_csv(cites.series) + "\n", "utf-8")
            written.append("evolution_citation.csv")
            bundles = analytics.figure_bundles(matrix, series, cites)
            (out / "figures.json").write_text(
                json.dumps(bundles, sort_keys=True, indent=1) + "\n", "utf-8")
            written.append("figures.json")

        (out / "edges.csv").write_text(citenet.export_edge_list(graph) + "\n", "utf-8")
        (out / "nodes.csv").write_text(citenet.export_node_attributes(graph) + "\n", "utf-8")
        written += ["edges.csv", "nodes.csv"]

        from .classifier import export_assignments_jsonl
        for rs_id in sorted(store.list_ids("run_set")):
            rs: RunSet = store.get("run_set", rs_id)
            path = out / f"assignments_{rs_id}.jsonl"
            path.write_text(export_assignments_jsonl(rs) + "\n", "utf-8")
            written.append(path.name)

        ranking_graph = graph
        if GATE_DIMENSION in graph.label_universe:
            ranking_graph = citenet.induce_category_subgraph(graph, GATE_DIMENSION, "Yes")
        if ranking_graph.nodes:
            measures = {
                "in_degree": citenet.in_degree_centrality(ranking_graph),
                "pagerank": citenet.pagerank(ranking_graph),
                "betweenness": citenet.betweenness_centrality(ranking_graph),
            }
            for name, scores in measures.items():
                ranked = citenet.top_k(scores, len(ranking_graph.nodes),
                                       ranking_graph.node_years)
                lines = ["paper_id,score"] + [f"{pid},{score!r}" for pid, score in ranked]
                path = out / f"centrality_{name}.csv"
                path.write_text("\n".join(lines) + "\n", "utf-8")
                written.append(path.name)
        _emit(ctx, {"out_dir": str(out), "files": sorted(written)})
    except Exception as e:
        _fail(e)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP service."""
    try:
        if not ctx.obj["config_path"]:
            _fail(StoreError("serve needs --config"))
        from .service import serve as run_service
        config = ServiceConfig.from_file(ctx.obj["config_path"])
        run_service(config, host=host, port=port)
    except Exception as e:
        _fail(e)


@main.command("taxonomy-import")
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.pass_context
def taxonomy_import(ctx, file_path):
    """Load a taxonomy YAML file into the store."""
    try:
        store = _store(ctx)
        t = load_taxonomy_file(file_path)
        version = store.put("taxonomy", "main", t)
        _emit(ctx, {"dimensions": len(t), "taxonomy_version": version})
    except Exception as e:
        _fail(e)


if __name__ == "__main__":
    main()
