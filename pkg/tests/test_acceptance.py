"""Acceptance suite: one test per release criterion, each printing a
[PASS]/[FAIL] line (bypassing pytest capture so the lines always show)."""

import functools
import json
import random
import sys
import threading
import time
from pathlib import Path

import pytest

from litreview.analytics import format_percent
from litreview.citenet import (CitationGraph, betweenness_centrality,
                               in_degree_centrality, pagerank, resolve_references)
from litreview.classifier import Finals, LabelAssignment, RunSet, gate_positive
from litreview.corpus import Corpus
from litreview.evaluation import (GoldLabelSet, GoldSet, MetricBundle, PRF,
                                  jaccard_mean, lenient_accuracy, micro_prf,
                                  sample_prf, self_consistency)
from litreview.gateway import mock_gateway
from litreview.pipeline import run_full_pipeline
from litreview.store import Store, VersionConflict
from litreview.taxonomy import Taxonomy, builtin_option_pricing_taxonomy

from expected_prompts import (FINAL_GATE_CONSTRAINT, GATE_CONSTRAINT_LINES,
                              UNDERLYING_QUESTIONS)
from oracles import (betweenness_oracle, jaccard_mean_oracle,
                     lenient_accuracy_oracle, micro_prf_oracle, pagerank_oracle,
                     sample_prf_oracle, self_consistency_oracle)

FIXTURES = Path(__file__).parent / "fixtures"
TOL = 1e-12


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def runner(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}", file=sys.__stdout__, flush=True)
                raise
            print(f"[PASS] {name}", file=sys.__stdout__, flush=True)
            return result
        return runner
    return wrap


def random_label_fixture(rng):
    n = rng.randint(1, 50)
    k = rng.randint(1, 7)
    vocab = [f"L{j}" for j in range(k)]
    gold = {f"p{i}": frozenset(rng.sample(vocab, rng.randint(1, k))) for i in range(n)}
    pred = {f"p{i}": frozenset(rng.sample(vocab, rng.randint(1, k))) for i in range(n)}
    return gold, pred, vocab, k, n


def run_set_from(runs_by_paper, dim_id="underlying"):
    reps = len(next(iter(runs_by_paper.values())))
    assignments = [
        LabelAssignment(pid, dim_id, r, frozenset(labels), "m", 1)
        for pid, sets in runs_by_paper.items()
        for r, labels in enumerate(sets, start=1)
    ]
    return RunSet(dim_id, "m", 1, reps, tuple(sorted(runs_by_paper)), assignments)


@criterion("metric oracle suite: 200 random fixtures within 1e-12 in < 5 s")
def test_metric_oracle_suite():
    start = time.perf_counter()
    rng = random.Random(123_456)
    for _ in range(200):
        gold, pred, vocab, k, n = random_label_fixture(rng)
        assert abs(jaccard_mean(pred, gold) - jaccard_mean_oracle(pred, gold)) <= TOL
        assert abs(lenient_accuracy(pred, gold) - lenient_accuracy_oracle(pred, gold)) <= TOL
        mine = micro_prf(pred, gold)
        op, orc, of = micro_prf_oracle(pred, gold)
        assert abs(mine.precision - op) <= TOL
        assert abs(mine.recall - orc) <= TOL
        assert abs(mine.f1 - of) <= TOL
        mine = sample_prf(pred, gold)
        op, orc, of = sample_prf_oracle(pred, gold)
        assert abs(mine.precision - op) <= TOL
        assert abs(mine.recall - orc) <= TOL
        assert abs(mine.f1 - of) <= TOL
        reps = rng.randint(2, 4)
        runs = {f"p{i}": [frozenset(rng.sample(vocab, rng.randint(1, k)))
                          for _ in range(reps)] for i in range(n)}
        assert abs(self_consistency(run_set_from(runs)).rate
                   - self_consistency_oracle(runs)) <= TOL
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"metric oracle suite took {elapsed:.2f}s"


@criterion("worked example: micro F1 = sample F1 = 0.6667, Jaccard 0.5, lenient 1.0")
def test_worked_example():
    gold = {"p1": frozenset("A"), "p2": frozenset({"B", "C"})}
    pred = {"p1": frozenset({"A", "B"}), "p2": frozenset("B")}
    assert abs(micro_prf(pred, gold).f1 - 2 / 3) <= TOL
    assert abs(sample_prf(pred, gold).f1 - 2 / 3) <= TOL
    assert abs(jaccard_mean(pred, gold) - 0.5) <= TOL
    assert abs(lenient_accuracy(pred, gold) - 1.0) <= TOL
    assert f"{micro_prf(pred, gold).f1:.4f}" == "0.6667"


@criterion("micro F1 footnote form 2TP/(2TP+FP+FN) equals harmonic mean within 1e-12")
def test_footnote_formula_fidelity():
    rng = random.Random(777)
    for _ in range(200):
        gold, pred, *_ = random_label_fixture(rng)
        prf = micro_prf(pred, gold)
        if prf.precision and prf.recall:
            harmonic = 2 * prf.precision * prf.recall / (prf.precision + prf.recall)
            assert abs(prf.f1 - harmonic) <= TOL


@criterion("graph oracle suite: pagerank 1e-8 / sum 1e-6, exact betweenness, anchors, < 10 s")
def test_graph_oracle_suite():
    start = time.perf_counter()
    rng = random.Random(31_337)
    for _ in range(100):
        n = rng.randint(1, 8)
        nodes = [f"n{i}" for i in range(n)]
        edges = [(u, v) for u in nodes for v in nodes if u != v and rng.random() < 0.3]
        g = CitationGraph()
        g.nodes.update(nodes)
        for u, v in edges:
            g.add_edge(u, v)
        mine = pagerank(g, damping=0.85, tolerance=1e-14, max_iterations=100_000).scores
        oracle = pagerank_oracle(nodes, edges, damping=0.85)
        assert abs(sum(mine.values()) - 1.0) <= 1e-6
        for v in nodes:
            assert abs(mine[v] - oracle[v]) <= 1e-8
        btw = betweenness_centrality(g).scores
        btw_oracle = betweenness_oracle(nodes, edges)
        for v in nodes:
            assert btw[v] == float(btw_oracle[v])

    cycle = CitationGraph()
    for u, v in [("A", "B"), ("B", "C"), ("C", "A")]:
        cycle.add_edge(u, v)
    for score in pagerank(cycle).scores.values():
        assert abs(score - 1 / 3) <= 1e-9

    two = CitationGraph()
    two.add_edge("A", "B")
    scores = pagerank(two, damping=0.85).scores
    assert abs(scores["A"] - 0.3509) <= 1e-4
    assert abs(scores["B"] - 0.6491) <= 1e-4

    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"graph oracle suite took {elapsed:.2f}s"


@criterion("prompt byte-fidelity: gate constraints verbatim+ordered, all six asset questions")
def test_prompt_byte_fidelity():
    taxonomy = builtin_option_pricing_taxonomy()
    gate_prompt = taxonomy.dimension("pricing_model").render_prompt("Sample abstract.")
    assert len(GATE_CONSTRAINT_LINES) >= 22
    position = -1
    for line in GATE_CONSTRAINT_LINES:
        assert gate_prompt.count(line) == 1, f"constraint missing or repeated: {line[:50]}..."
        found = gate_prompt.find(line)
        assert found > position, f"constraint out of order: {line[:50]}..."
        position = found
    assert FINAL_GATE_CONSTRAINT in gate_prompt

    asset_prompt = taxonomy.dimension("underlying").render_prompt("Sample abstract.")
    for question in UNDERLYING_QUESTIONS:
        assert question in asset_prompt
    assert "Does this abstract specify Stocks as underlying assets?" in asset_prompt


def _run_e2e_once():
    corpus = Corpus("main")
    delta = corpus.ingest_export(FIXTURES / "e2e" / "corpus.csv", "scopus_csv")
    assert len(delta.added) == 12
    gateway = mock_gateway(FIXTURES / "e2e" / "mock_script.json")
    result = run_full_pipeline(corpus, builtin_option_pricing_taxonomy(), gateway,
                               repetitions=3, min_combination_count=1)
    return result


@criterion("end-to-end determinism: byte-identical outputs twice + expected tables, < 30 s")
def test_end_to_end_determinism():
    start = time.perf_counter()
    first = _run_e2e_once()
    second = _run_e2e_once()
    assert first.machine_json() == second.machine_json()

    expected = json.loads((FIXTURES / "e2e" / "expected.json").read_text())
    out = first.machine_outputs()

    for dim_id, labels in expected["finals"].items():
        got = out["finals"][dim_id]["labels"]
        assert got == labels, f"finals mismatch in {dim_id}"

    gate = out["gate"]
    assert gate["count"] == expected["gate"]["count"]
    assert gate["total"] == expected["gate"]["total"]
    assert gate["percent"] == expected["gate"]["percent"]
    assert gate["positives"] == expected["gate"]["positives"]

    for dim_id, table in expected["frequency"].items():
        got = out["frequency"][dim_id]
        assert got["single_label_counts"] == table["singles"], dim_id
        assert got["combination_counts"] == table["combinations"], dim_id
        assert got["denominator"] == table["denominator"], dim_id

    got_occurrence = {r["label"]: r for r in out["occurrence"]}
    for row in expected["occurrence"]:
        got = got_occurrence[row["label"]]
        assert got["occurrence"] == row["occurrence"]
        assert got["percent"] == row["percent"]

    chord = out["chord"]
    assert chord["classes"] == expected["chord"]["classes"]
    for i, d in enumerate(expected["chord"]["diagonal"]):
        assert chord["matrix"][i][i] == d
    for pair, count in expected["chord"]["pair_counts"].items():
        a, b = pair.split("|")
        ia, ib = chord["classes"].index(a), chord["classes"].index(b)
        assert chord["matrix"][ia][ib] == count
        assert chord["matrix"][ib][ia] == count

    series_by_label = {s["label"]: dict((str(y), v) for y, v in s["points"])
                       for s in out["cooccurrence_series"]}
    assert series_by_label == expected["cooccurrence_series"]

    cite_totals = {s["label"]: s["points"][-1][1]
                   for s in out["citation_series"]["series"]}
    assert cite_totals == expected["citation_totals"]
    assert out["citation_series"]["skipped_edges"] == expected["citation_skipped_edges"]

    assert out["resolution_stats"] == expected["resolution_stats"]
    assert out["gate_subgraph_edges"] == expected["induced_edges"]

    assert out["centralities"]["in_degree"]["scores"] == expected["in_degree"]
    assert [pid for pid, _s in out["top10"]["in_degree"]] == expected["top10_in_degree"]
    assert out["centralities"]["betweenness"]["scores"] == expected["betweenness"]
    for pid, value in expected["pagerank"].items():
        assert abs(out["centralities"]["pagerank"]["scores"][pid] - value) <= 1e-8

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"end-to-end run took {elapsed:.2f}s"


@criterion("arithmetic anchors: 3956/5942 -> 66.58% and 5942/11916 -> 49.86%")
def test_arithmetic_anchors():
    assert format_percent(3956 / 5942) == "66.58%"
    finals = Finals("pricing_model", "m", 1,
                    labels={f"p{i}": frozenset({"Yes" if i < 5942 else "No"})
                            for i in range(11916)})
    report = gate_positive([f"p{i}" for i in range(11916)], finals)
    assert report.count == 5942
    assert report.total == 11916
    assert report.percent == "49.86%"


@criterion("ingestion accounting: 20 rows -> added=15 rejected=5, re-ingest empty")
def test_ingestion_accounting():
    corpus = Corpus()
    delta = corpus.ingest_export(FIXTURES / "ingest20.csv", "scopus_csv")
    assert len(delta.added) == 15
    assert len(delta.rejected) == 5
    again = corpus.ingest_export(FIXTURES / "ingest20.csv", "scopus_csv")
    assert again.is_empty()
    assert not again.added and not again.updated


@criterion("store round-trip for every artifact kind + concurrent-write conflict")
def test_store_round_trip(tmp_path):
    store = Store(tmp_path / "store")
    corpus = Corpus("main")
    corpus.ingest_export(FIXTURES / "e2e" / "corpus.csv", "scopus_csv")
    taxonomy = builtin_option_pricing_taxonomy()
    graph = resolve_references(corpus)
    run_set = run_set_from({"a": [{"Stocks"}, {"Stocks"}]})
    gold = GoldSet("underlying", [GoldLabelSet("a", "underlying",
                                               frozenset({"Stocks"}), "ann")])
    finals = Finals("underlying", "m", 1, {"a": frozenset({"Stocks"})})
    report = MetricBundle(dimension_id="underlying", model_name="m",
                          prompt_version=1, n_samples=1, jaccard_mean=1.0,
                          micro=PRF(1.0, 1.0, 1.0), sample=PRF(1.0, 1.0, 1.0))
    artifacts = {"corpus": corpus, "taxonomy": taxonomy, "run_set": run_set,
                 "gold_set": gold, "graph": graph, "report": report,
                 "finals": finals}
    for kind, obj in artifacts.items():
        store.put(kind, "acceptance", obj)
        loaded = store.get(kind, "acceptance")
        assert loaded.to_dict() == obj.to_dict(), f"round-trip failed for {kind}"

    store.put("taxonomy", "contested", taxonomy)
    barrier = threading.Barrier(2)
    outcomes = []

    def write(tag):
        barrier.wait()
        try:
            store.put("taxonomy", "contested", taxonomy, expected_version=1)
            outcomes.append("ok")
        except VersionConflict:
            outcomes.append("conflict")

    threads = [threading.Thread(target=write, args=(t,)) for t in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(outcomes) == ["conflict", "ok"]
