import threading
import time

import pytest
from fastapi.testclient import TestClient

from litreview.corpus import Corpus
from litreview.gateway import Gateway, MockProvider, ProviderConfig
from litreview.service import AppState, ProviderSpec, ServiceConfig, create_app
from litreview.store import Store, StoreError
from litreview.taxonomy import builtin_option_pricing_taxonomy

POLL_TIMEOUT = 15.0


def wait_for(client, job_id, statuses=("completed", "failed", "cancelled")):
    deadline = time.time() + POLL_TIMEOUT
    while time.time() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in statuses:
            return job
        time.sleep(0.02)
    raise TimeoutError(f"job {job_id} did not finish: {job}")


@pytest.fixture
def service_env(tmp_path, e2e_corpus_path, mock_script_path):
    root = tmp_path / "store"
    store = Store(root)
    corpus = Corpus("main")
    corpus.ingest_export(e2e_corpus_path, "scopus_csv")
    store.put("corpus", "main", corpus)
    store.put("taxonomy", "main", builtin_option_pricing_taxonomy())
    config = ServiceConfig(
        store_root=str(root),
        providers=[ProviderSpec(
            config=ProviderConfig(provider_id="mock", model_name="mock"),
            mock_script=str(mock_script_path))],
        default_repetitions=3,
    )
    return config


@pytest.fixture
def client(service_env):
    return TestClient(create_app(service_env))


class TestHealthAndStartup:
    def test_healthz(self, client):
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert body["store"] == "ok"

    def test_missing_store_root_is_startup_error(self, tmp_path):
        config = ServiceConfig(store_root=str(tmp_path / "missing"))
        with pytest.raises(StoreError) as exc:
            create_app(config)
        assert "missing" in str(exc.value)


class TestPapersEndpoint:
    def test_query_with_filters(self, client):
        body = client.get("/papers", params={"keyword": "barrier", "limit": 10}).json()
        ids = {p["paper_id"] for p in body["papers"]}
        assert "P02" in ids
        assert body["total"] >= 1

    def test_bad_label_constraint(self, client):
        assert client.get("/papers", params={"label": "nodimension"}).status_code == 400


class TestTaxonomyEndpoints:
    def test_index_and_dimension(self, client):
        index = client.get("/taxonomy").json()
        assert [d["dimension_id"] for d in index["dimensions"]] == \
            ["pricing_model", "underlying", "option_type", "model_type"]
        dim = client.get("/taxonomy/underlying").json()
        assert dim["answer_mode"] == "labeled_multi"
        assert client.get("/taxonomy/nope").status_code == 404

    def test_constraint_edit_creates_version(self, client):
        before = client.get("/taxonomy/pricing_model").json()
        lines = list(before["prompt_template"]["constraints"])
        resp = client.post("/prompts/pricing_model/constraints",
                           json={"constraints": lines + ["One more line."],
                                 "editor": "tester"})
        assert resp.status_code == 200
        assert resp.json()["prompt_version"] == 2
        versions = client.get("/prompts/pricing_model/versions").json()
        assert [v["version"] for v in versions["versions"]] == [1, 2]
        assert versions["edits"][0]["editor"] == "tester"

    def test_edit_text_mapped_rejected(self, client):
        resp = client.post("/prompts/option_type/constraints",
                           json={"constraints": ["x"], "editor": "t"})
        assert resp.status_code == 400


class TestGoldEndpoints:
    def test_round_trip(self, client):
        resp = client.post("/gold/underlying", json={
            "paper_id": "P01", "labels": ["Stocks", "Interest Rates"],
            "annotator": "human"})
        assert resp.status_code == 200
        assert resp.json()["replaced"] is False
        listing = client.get("/gold/underlying").json()
        assert listing["records"][0]["labels"] == ["Interest Rates", "Stocks"]

    def test_vocabulary_enforced(self, client):
        resp = client.post("/gold/underlying", json={
            "paper_id": "P01", "labels": ["Gold Bars"], "annotator": "h"})
        assert resp.status_code == 400

    def test_conflict_without_overwrite(self, client):
        client.post("/gold/underlying", json={
            "paper_id": "P01", "labels": ["Stocks"], "annotator": "h"})
        resp = client.post("/gold/underlying", json={
            "paper_id": "P01", "labels": ["Indices"], "annotator": "h",
            "overwrite": False})
        assert resp.status_code == 409
        assert resp.json()["detail"]["existing_labels"] == ["Stocks"]

    def test_empty_labels_rejected(self, client):
        resp = client.post("/gold/underlying", json={
            "paper_id": "P01", "labels": [], "annotator": "h"})
        assert resp.status_code == 400


class TestJobs:
    def test_classify_completes_with_36_assignments(self, client):
        job = client.post("/jobs/classify",
                          json={"dimension_id": "pricing_model"}).json()
        done = wait_for(client, job["job_id"])
        assert done["status"] == "completed"
        assert done["progress"] == {"done": 36, "total": 36}

    def test_dependent_dimension_requires_gate(self, client):
        resp = client.post("/jobs/classify", json={"dimension_id": "underlying"})
        assert resp.status_code == 400

    def test_full_sequence_then_analytics(self, client):
        gate = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        wait_for(client, gate["job_id"])
        for dim in ("underlying", "option_type", "model_type"):
            job = client.post("/jobs/classify", json={"dimension_id": dim}).json()
            assert wait_for(client, job["job_id"])["status"] == "completed"

        chord = client.get("/analytics/chord").json()
        assert chord["classes"] == [str(i) for i in range(1, 9)]
        assert chord["matrix"][0][1] == 2

        occ = client.get("/analytics/occurrence").json()
        assert occ["rows"][0]["occurrence"] == 4

        freq = client.get("/analytics/frequency/underlying",
                          params={"min_count": 1}).json()
        assert freq["single_label_counts"]["Stocks"] == 2

        evolution = client.get("/analytics/evolution",
                               params={"kind": "cooccurrence"}).json()
        assert evolution["series"][0]["label"] == "1 & 2"

        citation = client.get("/analytics/evolution",
                              params={"kind": "citation"}).json()
        assert citation["skipped_edges"] == 1

        network = client.get("/network/centrality",
                             params={"measure": "in_degree", "dimension": "pricing_model",
                                     "label": "Yes", "k": 3}).json()
        assert [r["paper_id"] for r in network["rows"]] == ["P01", "P02", "P04"]
        assert network["rows"][0]["title"].startswith("A closed form")

        pagerank = client.get("/network/centrality",
                              params={"measure": "pagerank", "dimension": "pricing_model",
                                      "label": "Yes", "k": 1}).json()
        assert pagerank["rows"][0]["paper_id"] == "P01"

    def test_get_unknown_job(self, client):
        assert client.get("/jobs/deadbeef").status_code == 404

    def test_evaluations_after_gold_and_runs(self, client):
        job = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        wait_for(client, job["job_id"])
        gold = {"P01": ["Yes"], "P02": ["Yes"], "P06": ["No"], "P09": ["No"],
                "P05": ["No"]}
        for pid, labels in gold.items():
            client.post("/gold/pricing_model",
                        json={"paper_id": pid, "labels": labels, "annotator": "h"})
        body = client.get("/evaluations/pricing_model").json()
        bundle = body["bundles"][0]
        assert bundle["n_samples"] == 5
        assert bundle["self_consistency"] is not None
        assert body["comparison"]["rows"][0]["model"] == "mock"
        assert "table_text" in body


class BlockingProvider:
    """Releases one scripted answer per event set; used to observe running jobs."""

    def __init__(self, release: threading.Event, inner: MockProvider):
        self.release = release
        self.inner = inner
        self.calls = 0

    def send(self, prompt, context=None):
        self.release.wait(timeout=POLL_TIMEOUT)
        self.calls += 1
        return self.inner.send(prompt, context)


class SlowSpec(ProviderSpec):
    def __init__(self, config, script_path, release):
        super().__init__(config=config, mock_script=str(script_path))
        self._release = release

    def build_gateway(self):
        inner = MockProvider.from_file(self.mock_script)
        return Gateway(self.config, BlockingProvider(self._release, inner),
                       sleep=lambda _s: None)


class TestJobControl:
    @pytest.fixture
    def slow_env(self, tmp_path, e2e_corpus_path, mock_script_path):
        root = tmp_path / "store"
        store = Store(root)
        corpus = Corpus("main")
        corpus.ingest_export(e2e_corpus_path, "scopus_csv")
        store.put("corpus", "main", corpus)
        store.put("taxonomy", "main", builtin_option_pricing_taxonomy())
        release = threading.Event()
        config = ServiceConfig(
            store_root=str(root),
            providers=[SlowSpec(
                ProviderConfig(provider_id="mock", model_name="mock", max_concurrent=1),
                mock_script_path, release)],
            job_flush_every=1,
        )
        return config, release

    def test_identical_submissions_share_identity(self, slow_env):
        config, release = slow_env
        client = TestClient(create_app(config))
        first = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        second = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        assert first["job_id"] == second["job_id"]
        release.set()
        assert wait_for(client, first["job_id"])["status"] == "completed"

    def test_cancel_preserves_partial_assignments(self, slow_env):
        config, release = slow_env
        app = create_app(config)
        client = TestClient(app)
        job = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        release.set()
        deadline = time.time() + POLL_TIMEOUT
        while time.time() < deadline:
            if client.get(f"/jobs/{job['job_id']}").json()["progress"]["done"] >= 3:
                break
            time.sleep(0.01)
        result = client.post(f"/jobs/{job['job_id']}/cancel").json()
        status = client.get(f"/jobs/{job['job_id']}").json()
        if result["cancelled"]:
            assert status["status"] == "cancelled"
            state: AppState = app.state.engine
            run_set = state.store.get("run_set", job["identity"])
            assert 0 < len(run_set.assignments) <= 36
        else:
            assert status["status"] == "completed"  # finished before the cancel

    def test_cancel_finished_job_is_noop(self, slow_env):
        config, release = slow_env
        client = TestClient(create_app(config))
        release.set()
        job = client.post("/jobs/classify", json={"dimension_id": "pricing_model"}).json()
        wait_for(client, job["job_id"])
        result = client.post(f"/jobs/{job['job_id']}/cancel").json()
        assert result["cancelled"] is False
        assert "already" in result["note"]


class TestAuth:
    def test_bearer_token_enforced(self, service_env, monkeypatch):
        monkeypatch.setenv("LR_TOKEN", "hunter2")
        service_env.auth_env = "LR_TOKEN"
        client = TestClient(create_app(service_env))
        assert client.get("/taxonomy").status_code == 401
        assert client.get("/healthz").status_code == 200
        ok = client.get("/taxonomy", headers={"Authorization": "Bearer hunter2"})
        assert ok.status_code == 200

    def test_absent_token_config_disables_auth(self, client):
        assert client.get("/taxonomy").status_code == 200
