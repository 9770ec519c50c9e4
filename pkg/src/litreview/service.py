"""HTTP interface over the store: corpus queries, classification jobs, gold
labels, prompt versioning, evaluation, network and trend analytics.

Long-running classification is a job resource: submission is idempotent on
the run-set identity (dimension, model, prompt version), progress is
assignments persisted over total, and cancellation stops new gateway calls
while preserving completed assignments.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from pydantic import BaseModel

from . import analytics, citenet
from .classifier import Finals, RunSet, consolidate, gate_positive, run_dimension, run_set_identity
from .corpus import Corpus
from .evaluation import (EvaluationError, GoldLabelSet, GoldSet, MetricBundle,
                         compare_models, evaluate_dimension)
from .gateway import Gateway, HttpChatProvider, MockProvider, ProviderConfig
from .pipeline import GATE_DIMENSION
from .store import NotFoundError, QueryFilter, Store, StoreError, VersionConflict, query_papers
from .taxonomy import (AnswerMode, Taxonomy, TaxonomyDimension, TaxonomyError,
                       UnknownDimensionError, builtin_option_pricing_taxonomy)


@dataclass
class ProviderSpec:
    config: ProviderConfig
    mock_script: str | None = None

    def build_gateway(self) -> Gateway:
        if self.config.provider_id == "mock":
            if not self.mock_script:
                raise StoreError("mock provider needs a script file")
            return Gateway(self.config, MockProvider.from_file(self.mock_script),
                           sleep=lambda _s: None)
        return Gateway(self.config, HttpChatProvider(self.config))


@dataclass
class ServiceConfig:
    store_root: str
    corpus_id: str = "main"
    auth_env: str | None = None
    providers: list[ProviderSpec] = field(default_factory=list)
    default_repetitions: int = 3
    job_flush_every: int = 5

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        providers = [ProviderSpec(config=ProviderConfig.from_dict(p["config"]),
                                  mock_script=p.get("mock_script"))
                     for p in raw.get("providers", [])]
        return cls(
            store_root=raw["store_root"],
            corpus_id=raw.get("corpus_id", "main"),
            auth_env=raw.get("auth_env"),
            providers=providers,
            default_repetitions=int(raw.get("default_repetitions", 3)),
            job_flush_every=int(raw.get("job_flush_every", 5)),
        )

    def provider_for(self, model_name: str | None) -> ProviderSpec:
        if not self.providers:
            raise StoreError("no providers configured")
        if model_name is None:
            return self.providers[0]
        for spec in self.providers:
            if spec.config.model_name == model_name:
                return spec
        raise NotFoundError(f"no provider configured for model {model_name!r}")


@dataclass
class Job:
    job_id: str
    identity: str
    dimension_id: str
    model_name: str
    prompt_version: int
    repetitions: int
    status: str = "pending"  # pending | running | completed | cancelled | failed
    done: int = 0
    total: int = 0
    error: str = ""
    _stop: threading.Event = field(default_factory=threading.Event)
    _thread: threading.Thread | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "identity": self.identity,
            "dimension_id": self.dimension_id,
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "repetitions": self.repetitions,
            "status": self.status,
            "progress": {"done": self.done, "total": self.total},
            "error": self.error,
        }


class JobManager:
    """At most one active job per run-set identity; submission is idempotent."""

    def __init__(self, state: "AppState"):
        self.state = state
        self.jobs: dict[str, Job] = {}
        self.active: dict[str, str] = {}
        self._lock = threading.Lock()

    def submit(self, dimension_id: str, model_name: str | None,
               repetitions: int) -> Job:
        dim = self.state.taxonomy().dimension(dimension_id)
        if dim.depends_on and not self.state.store.exists("finals", dim.depends_on):
            raise StoreError(
                f"dimension {dimension_id} depends on {dim.depends_on}, "
                f"which has no consolidated finals yet")
        spec = self.state.config.provider_for(model_name)
        prompt_version = dim.prompt_template.version if dim.prompt_template else 0
        identity = run_set_identity(dimension_id, spec.config.model_name, prompt_version)
        with self._lock:
            active_id = self.active.get(identity)
            if active_id:
                job = self.jobs[active_id]
                if job.status in ("pending", "running"):
                    return job
            job = Job(job_id=uuid.uuid4().hex[:12], identity=identity,
                      dimension_id=dimension_id, model_name=spec.config.model_name,
                      prompt_version=prompt_version, repetitions=repetitions)
            self.jobs[job.job_id] = job
            self.active[identity] = job.job_id
        job._thread = threading.Thread(target=self._run, args=(job, dim, spec), daemon=True)
        job._thread.start()
        return job

    def get(self, job_id: str) -> Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"unknown job {job_id}")
        return job

    def cancel(self, job_id: str) -> dict:
        job = self.get(job_id)
        if job.status in ("completed", "cancelled", "failed"):
            return {"job": job.to_dict(), "cancelled": False,
                    "note": f"job already {job.status}"}
        job._stop.set()
        if job._thread is not None:
            job._thread.join()
        return {"job": job.to_dict(), "cancelled": True, "note": ""}

    def _run(self, job: Job, dim: TaxonomyDimension, spec: ProviderSpec) -> None:
        state = self.state
        try:
            corpus = state.corpus()
            if dim.depends_on:
                gate_finals: Finals = state.store.get("finals", dim.depends_on)
                report = gate_positive(list(corpus), gate_finals)
                papers = [corpus.get(pid) for pid in report.positives]
                if not papers:
                    raise StoreError(f"gate dimension {dim.depends_on} has no positive papers")
            else:
                papers = sorted(corpus, key=lambda r: r.paper_id)
            reps = 1 if dim.answer_mode is AnswerMode.TEXT_MAPPED else job.repetitions
            job.total = len(papers) * reps
            existing: RunSet | None = None
            if state.store.exists("run_set", job.identity):
                existing = state.store.get("run_set", job.identity)
            job.done = len(existing.assignments) if existing else 0
            job.status = "running"
            gateway = spec.build_gateway()
            flush_every = max(1, state.config.job_flush_every)
            collected = list(existing.assignments) if existing else []
            lock = threading.Lock()

            def snapshot() -> RunSet:
                rs = RunSet(dimension_id=dim.dimension_id,
                            model_name=spec.config.model_name,
                            prompt_version=job.prompt_version,
                            repetitions=reps,
                            targets=tuple(sorted(p.paper_id for p in papers)),
                            assignments=list(collected))
                rs.sort()
                return rs

            def on_assignment(a):
                with lock:
                    collected.append(a)
                    job.done += 1
                    flush = job.done % flush_every == 0
                if flush:
                    state.store.put("run_set", job.identity, snapshot())

            run_set = run_dimension(papers, dim, gateway, job.repetitions,
                                    existing=existing, on_assignment=on_assignment,
                                    should_stop=job._stop.is_set)
            state.store.put("run_set", job.identity, run_set)
            if job._stop.is_set():
                job.status = "cancelled"
                return
            finals = consolidate(run_set, dim)
            state.store.put("finals", dim.dimension_id, finals)
            state.invalidate_caches()
            job.status = "completed"
        except Exception as e:  # job surface: report, never crash the server
            if job._stop.is_set():
                job.status = "cancelled"
            else:
                job.status = "failed"
                job.error = str(e)


class AppState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = Store(config.store_root, create=False)
        self.jobs = JobManager(self)
        self._cache_lock = threading.Lock()
        self._graph_cache: dict = {}
        if not self.store.exists("taxonomy", "main"):
            self.store.put("taxonomy", "main", builtin_option_pricing_taxonomy())

    def taxonomy(self) -> Taxonomy:
        return self.store.get("taxonomy", "main")

    def save_taxonomy(self, taxonomy: Taxonomy) -> int:
        version = self.store.put("taxonomy", "main", taxonomy)
        self.invalidate_caches()
        return version

    def corpus(self) -> Corpus:
        return self.store.get("corpus", self.config.corpus_id)

    def finals_by_dim(self) -> dict[str, Finals]:
        out = {}
        for dim_id in self.store.list_ids("finals"):
            out[dim_id] = self.store.get("finals", dim_id)
        return out

    def invalidate_caches(self) -> None:
        with self._cache_lock:
            self._graph_cache.clear()

    def labeled_graph(self) -> citenet.CitationGraph:
        """Citation graph with gate labels and rolled-up class labels
        attached; cached until a write invalidates it."""
        key = "graph"
        with self._cache_lock:
            if key in self._graph_cache:
                return self._graph_cache[key]
        corpus = self.corpus()
        graph = citenet.resolve_references(corpus)
        taxonomy = self.taxonomy()
        finals = self.finals_by_dim()
        for dim in taxonomy:
            fin = finals.get(dim.dimension_id)
            if fin is None:
                continue
            if dim.answer_mode is AnswerMode.SUBCLASS_INDEXED:
                labels = analytics.rollup_labels(fin.labels, dim)
                vocab = frozenset(str(c) for c in dim.rollup_map().values())
            else:
                labels = fin.labels
                vocab = frozenset(dim.valid_labels())
            graph.attach_labels(dim.dimension_id, labels, vocabulary=vocab)
        with self._cache_lock:
            self._graph_cache[key] = graph
        return graph


class GoldSubmission(BaseModel):
    paper_id: str
    labels: list[str]
    annotator: str = ""
    overwrite: bool = True


class ConstraintEdit(BaseModel):
    constraints: list[str]
    editor: str = ""


class ClassifyRequest(BaseModel):
    dimension_id: str
    model_name: str | None = None
    repetitions: int | None = None


def create_app(config: ServiceConfig) -> FastAPI:
    state = AppState(config)
    app = FastAPI(title="litreview service")
    app.state.engine = state

    token_env = config.auth_env
    expected_token = os.environ.get(token_env) if token_env else None

    async def check_auth(request: Request):
        if expected_token is None:
            return
        if request.url.path == "/healthz":
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {expected_token}":
            raise HTTPException(status_code=401, detail={"code": "unauthorized",
                                                         "message": "bad or missing bearer token"})

    dep = [Depends(check_auth)]

    def http_error(e: Exception) -> HTTPException:
        if isinstance(e, (NotFoundError, UnknownDimensionError)):
            return HTTPException(404, detail={"code": "not_found", "message": str(e)})
        if isinstance(e, VersionConflict):
            return HTTPException(409, detail={"code": "conflict", "message": str(e)})
        return HTTPException(400, detail={"code": "bad_request", "message": str(e)})

    @app.get("/healthz")
    def healthz():
        ok = state.store.root.is_dir()
        return {"status": "ok" if ok else "degraded",
                "store": "ok" if ok else "unreachable",
                "store_root": str(state.store.root)}

    # -- corpus ------------------------------------------------------------

    @app.get("/papers", dependencies=dep)
    def papers(year_from: int | None = None, year_to: int | None = None,
               keyword: str | None = None, label: list[str] = Query(default=[]),
               limit: int = 50, offset: int = 0):
        constraints = []
        for item in label:
            if ":" not in item:
                raise http_error(StoreError(f"label constraint must be dim:label, got {item!r}"))
            dim_id, lab = item.split(":", 1)
            include = not lab.startswith("!")
            constraints.append((dim_id, lab.lstrip("!"), include))
        try:
            qf = QueryFilter(
                year_range=(year_from, year_to) if year_from or year_to else None,
                label_constraints=constraints, keyword=keyword,
                limit=limit, offset=offset)
            return query_papers(state.corpus(), state.finals_by_dim(), qf).to_dict()
        except (StoreError, NotFoundError) as e:
            raise http_error(e)

    # -- taxonomy & prompts --------------------------------------------------

    @app.get("/taxonomy", dependencies=dep)
    def taxonomy_index():
        t = state.taxonomy()
        return {"dimensions": [
            {"dimension_id": d.dimension_id, "name": d.name,
             "answer_mode": d.answer_mode.value, "depends_on": d.depends_on,
             "labels": [l.label for l in d.labels],
             "valid_labels": list(d.valid_labels()),
             "prompt_version": d.prompt_template.version if d.prompt_template else None}
            for d in t
        ]}

    @app.get("/taxonomy/{dim_id}", dependencies=dep)
    def taxonomy_dimension(dim_id: str):
        try:
            return state.taxonomy().dimension(dim_id).to_dict()
        except TaxonomyError as e:
            raise http_error(e)

    @app.put("/taxonomy/{dim_id}", dependencies=dep)
    def taxonomy_put(dim_id: str, body: dict):
        try:
            taxonomy = state.taxonomy()
            new_dim = TaxonomyDimension.from_dict(body)
            if new_dim.dimension_id != dim_id:
                raise TaxonomyError("dimension_id in body does not match path")
            taxonomy._dims[dim_id] = new_dim
            version = state.save_taxonomy(taxonomy)
            return {"dimension_id": dim_id, "taxonomy_version": version}
        except TaxonomyError as e:
            raise http_error(e)

    @app.post("/prompts/{dim_id}/constraints", dependencies=dep)
    def edit_constraints(dim_id: str, body: ConstraintEdit):
        try:
            taxonomy = state.taxonomy()
            template = taxonomy.edit_constraints(dim_id, body.constraints, body.editor)
            state.save_taxonomy(taxonomy)
            return {"dimension_id": dim_id, "prompt_version": template.version,
                    "constraints": list(template.constraints)}
        except TaxonomyError as e:
            raise http_error(e)

    @app.get("/prompts/{dim_id}/versions", dependencies=dep)
    def prompt_versions(dim_id: str):
        try:
            dim = state.taxonomy().dimension(dim_id)
            return {"dimension_id": dim_id,
                    "versions": [t.to_dict() for t in dim.template_history],
                    "edits": [e.to_dict() for e in dim.edits]}
        except TaxonomyError as e:
            raise http_error(e)

    # -- gold labels ---------------------------------------------------------

    @app.post("/gold/{dim_id}", dependencies=dep)
    def post_gold(dim_id: str, body: GoldSubmission):
        try:
            dim = state.taxonomy().dimension(dim_id)
            labels = frozenset(body.labels)
            bad = labels - set(dim.valid_labels())
            if bad:
                raise EvaluationError(f"labels outside vocabulary: {', '.join(sorted(bad))}")
            if state.store.exists("gold_set", dim_id):
                gold: GoldSet = state.store.get("gold_set", dim_id)
            else:
                gold = GoldSet(dimension_id=dim_id)
            existing = gold.find(body.paper_id)
            if existing is not None and not body.overwrite:
                raise HTTPException(409, detail={
                    "code": "already_annotated",
                    "message": f"{body.paper_id} already annotated",
                    "existing_labels": sorted(existing.labels)})
            from datetime import datetime, timezone
            replaced = gold.upsert(GoldLabelSet(
                paper_id=body.paper_id, dimension_id=dim_id, labels=labels,
                annotator=body.annotator, annotated_at=datetime.now(timezone.utc)))
            version = state.store.put("gold_set", dim_id, gold)
            return {"dimension_id": dim_id, "paper_id": body.paper_id,
                    "replaced": replaced, "gold_version": version,
                    "annotated": len(gold.records)}
        except (TaxonomyError, EvaluationError, StoreError) as e:
            raise http_error(e)

    @app.get("/gold/{dim_id}", dependencies=dep)
    def get_gold(dim_id: str):
        try:
            gold: GoldSet = state.store.get("gold_set", dim_id)
        except NotFoundError:
            return {"dimension_id": dim_id, "records": []}
        return gold.to_dict()

    # -- jobs ------------------------------------------------------------------

    @app.post("/jobs/classify", dependencies=dep)
    def submit_job(body: ClassifyRequest):
        try:
            reps = body.repetitions or config.default_repetitions
            if reps < 1:
                raise StoreError("repetitions must be >= 1")
            job = state.jobs.submit(body.dimension_id, body.model_name, reps)
            return job.to_dict()
        except (TaxonomyError, StoreError, NotFoundError) as e:
            raise http_error(e)

    @app.get("/jobs/{job_id}", dependencies=dep)
    def get_job(job_id: str):
        try:
            return state.jobs.get(job_id).to_dict()
        except NotFoundError as e:
            raise http_error(e)

    @app.post("/jobs/{job_id}/cancel", dependencies=dep)
    def cancel_job(job_id: str):
        try:
            return state.jobs.cancel(job_id)
        except NotFoundError as e:
            raise http_error(e)

    # -- evaluation --------------------------------------------------------------

    @app.get("/evaluations/{dim_id}", dependencies=dep)
    def evaluations(dim_id: str):
        try:
            dim = state.taxonomy().dimension(dim_id)
            gold: GoldSet = state.store.get("gold_set", dim_id)
            bundles: list[MetricBundle] = []
            for rs_id in state.store.list_ids("run_set"):
                rs: RunSet = state.store.get("run_set", rs_id)
                if rs.dimension_id != dim_id or not rs.assignments:
                    continue
                bundles.append(evaluate_dimension(dim, rs, gold))
            if not bundles:
                raise NotFoundError(f"no run sets evaluated for {dim_id}")
            comparison = compare_models(bundles)
            return {"dimension_id": dim_id,
                    "bundles": [b.to_dict() for b in bundles],
                    "comparison": comparison.to_dict(),
                    "table_text": comparison.to_text()}
        except (TaxonomyError, EvaluationError, NotFoundError, StoreError) as e:
            raise http_error(e)

    # -- network & analytics ---------------------------------------------------

    @app.get("/network/centrality", dependencies=dep)
    def network_centrality(measure: str = "pagerank", dimension: str | None = None,
                           label: str | None = None, k: int = 10):
        try:
            graph = state.labeled_graph()
            if dimension and label:
                graph = citenet.induce_category_subgraph(graph, dimension, label)
            if measure == "in_degree":
                scores = citenet.in_degree_centrality(graph)
            elif measure == "pagerank":
                if not graph.nodes:
                    return {"measure": measure, "rows": [], "parameters": {}}
                scores = citenet.pagerank(graph)
            elif measure == "betweenness":
                scores = citenet.betweenness_centrality(graph)
            else:
                raise StoreError(f"unknown measure {measure!r}")
            ranked = citenet.top_k(scores, k, graph.node_years) if graph.nodes else []
            corpus = state.corpus()
            rows = []
            for pid, score in ranked:
                rec = corpus.get(pid)
                rows.append({"paper_id": pid, "score": score,
                             "title": rec.title if rec else None,
                             "year": graph.node_years.get(pid)})
            return {"measure": measure, "rows": rows, "parameters": scores.parameters}
        except (citenet.GraphError, StoreError, NotFoundError) as e:
            raise http_error(e)

    def _class_sets_and_dim(taxonomy: Taxonomy):
        for dim in taxonomy:
            if dim.answer_mode is AnswerMode.SUBCLASS_INDEXED:
                fin = state.store.get("finals", dim.dimension_id)
                return analytics.rollup_labels(fin.labels, dim), dim
        raise NotFoundError("no subclass dimension with finals")

    @app.get("/analytics/frequency/{dim_id}", dependencies=dep)
    def frequency(dim_id: str, min_count: int = 10, rolled: bool = False):
        try:
            dim = state.taxonomy().dimension(dim_id)
            fin: Finals = state.store.get("finals", dim_id)
            labels = analytics.rollup_labels(fin.labels, dim) if rolled else fin.labels
            table = analytics.label_frequency(labels, dim_id, min_count)
            return table.to_dict()
        except (TaxonomyError, NotFoundError, StoreError) as e:
            raise http_error(e)

    @app.get("/analytics/occurrence", dependencies=dep)
    def occurrence():
        try:
            class_sets, dim = _class_sets_and_dim(state.taxonomy())
            classes = sorted({str(c) for c in dim.rollup_map().values()}, key=int)
            rows = analytics.occurrence_proportions(class_sets, classes)
            return {"dimension_id": dim.dimension_id, "denominator": len(class_sets),
                    "rows": [r.to_dict() for r in rows]}
        except (NotFoundError, StoreError) as e:
            raise http_error(e)

    @app.get("/analytics/chord", dependencies=dep)
    def chord():
        try:
            class_sets, dim = _class_sets_and_dim(state.taxonomy())
            classes = sorted({str(c) for c in dim.rollup_map().values()}, key=int)
            return analytics.cooccurrence_matrix(class_sets, classes).to_dict()
        except (NotFoundError, StoreError) as e:
            raise http_error(e)

    @app.get("/analytics/evolution", dependencies=dep)
    def evolution(kind: str = "cooccurrence"):
        try:
            class_sets, dim = _class_sets_and_dim(state.taxonomy())
            if kind == "cooccurrence":
                corpus = state.corpus()
                years = {r.paper_id: r.year for r in corpus}
                series = analytics.cumulative_cooccurrence_series(class_sets, years)
                return {"kind": kind, "series": [s.to_dict() for s in series]}
            if kind == "citation":
                graph = state.labeled_graph()
                sub = citenet.induce_category_subgraph(graph, GATE_DIMENSION, "Yes") \
                    if GATE_DIMENSION in graph.label_universe else graph
                result = analytics.cumulative_cross_citation_series(sub, dim.dimension_id)
                return {"kind": kind, "series": [s.to_dict() for s in result.series],
                        "skipped_edges": result.skipped_edges}
            raise StoreError(f"unknown evolution kind {kind!r}")
        except (citenet.GraphError, NotFoundError, StoreError) as e:
            raise http_error(e)

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000):
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")
