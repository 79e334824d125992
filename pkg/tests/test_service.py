"""HTTP API behavior via the in-process test client."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from zeromiss.cli import AppConfig
from zeromiss.select import BudgetQuery, select_best
from zeromiss.service import create_app


@pytest.fixture
def client(small_config_path):
    cfg = AppConfig.from_file(str(small_config_path))
    app = create_app(cfg)
    with TestClient(app) as c:
        c.app_config = cfg
        yield c


def wait_for_job(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/jobs/{job_id}").json()
        if body["status"] in ("done", "failed"):
            return body
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish in {timeout}s")


class TestTestsEndpoint:
    def test_get_returns_the_table(self, client):
        body = client.get("/tests").json()
        assert [t["name"] for t in body["tests"]] == ["Trigger", "NoiseOne", "NoiseTwo"]

    def test_put_replaces_costs(self, client):
        body = client.get("/tests").json()
        body["tests"][0]["cost"] = 777
        updated = client.put("/tests", json=body).json()
        assert updated["tests"][0]["cost"] == 777
        assert client.get("/tests").json()["tests"][0]["cost"] == 777

    def test_put_rejects_negative_values(self, client):
        body = client.get("/tests").json()
        body["tests"][0]["cost"] = -5
        assert client.put("/tests", json=body).status_code == 422

    def test_put_rejects_unknown_test_without_columns(self, client):
        response = client.put("/tests", json={"tests": [
            {"name": "Mystery", "cost": 10, "discomfort": 1}
        ]})
        assert response.status_code == 422

    def test_put_accepts_new_test_with_columns(self, client):
        body = client.get("/tests").json()
        body["tests"].append({"name": "Extra", "cost": 5, "discomfort": 0,
                               "columns": ["n2"]})
        assert client.put("/tests", json=body).status_code == 200
        assert len(client.get("/tests").json()["tests"]) == 4


class TestSelectJobs:
    def test_select_job_returns_ranked_options(self, client):
        job = client.post("/select", json={"mode": "cost", "budget": 200}).json()
        body = wait_for_job(client, job["job_id"])
        assert body["status"] == "done"
        options = body["result"]["options"]
        assert len(options) == 3
        fas = [o["result"]["fa"] for o in options]
        assert fas == sorted(fas)
        assert all(o["result"]["sensitivity"] in (None, 1.0) for o in options)

    def test_api_matches_library_ranking(self, client):
        job = client.post("/select", json={"mode": "cost", "budget": 200}).json()
        api_options = wait_for_job(client, job["job_id"])["result"]["options"]

        cfg = client.app_config
        ranked = select_best(BudgetQuery(mode="cost_select", budget=200),
                             cfg.load_cohort(cfg.pipeline.seed), cfg.pipeline,
                             cfg.load_tests())
        assert [o["kept_tests"] for o in api_options] == [list(o.kept_tests) for o in ranked]
        assert [o["result"]["fa"] for o in api_options] == [o.result.fa for o in ranked]

    def test_bad_mode_rejected_up_front(self, client):
        assert client.post("/select", json={"mode": "vibes", "budget": 1}).status_code == 422

    def test_unknown_job_is_404(self, client):
        assert client.get("/jobs/job-doesnotexist").status_code == 404

    def test_select_appends_run_record(self, client):
        job = client.post("/select", json={"mode": "discomfort", "budget": 3}).json()
        body = wait_for_job(client, job["job_id"])
        run_id = body["result"]["run_id"]
        runs = client.get("/runs").json()["runs"]
        assert any(r["run_id"] == run_id and r["kind"] == "select" for r in runs)


class TestTrainAndPredict:
    def test_predict_without_model_is_409(self, client):
        response = client.post("/predict", json={"record": {}})
        assert response.status_code == 409

    def test_train_then_runs_then_predict(self, client):
        job = client.post("/train", json={}).json()
        body = wait_for_job(client, job["job_id"])
        assert body["status"] == "done"
        run_id = body["result"]["run_id"]
        assert body["result"]["calibration"]["post"]["fn"] == 0

        listed = client.get("/runs").json()["runs"]
        assert listed[-1]["run_id"] == run_id
        single = client.get(f"/runs/{run_id}")
        assert single.status_code == 200
        assert single.json()["kind"] == "train"

        # the tiny config uses the bundled default schema for /predict
        from zeromiss.schema import default_schema

        schema = default_schema()
        record = {}
        for spec in schema.feature_fields:
            if spec.kind == "numeric":
                record[spec.name] = float(spec.bin_edges[0])
            else:
                record[spec.name] = spec.values[0]
        response = client.post("/predict", json={"record": record})
        # tiny cohort columns differ from the bundled schema: a clear 422,
        # never a silent wrong answer
        assert response.status_code == 422

    def test_run_listing_preserves_insertion_order(self, client):
        ids = []
        for _ in range(2):
            job = client.post("/train", json={}).json()
            ids.append(wait_for_job(client, job["job_id"])["result"]["run_id"])
        listed = [r["run_id"] for r in client.get("/runs").json()["runs"]]
        assert listed[-2:] == ids

    def test_unknown_run_is_404(self, client):
        assert client.get("/runs/run-doesnotexist").status_code == 404


class TestProtocolDefaults:
    def test_service_defaults_to_holdout_when_config_is_silent(self, tmp_path):
        config = {
            "pipeline": {"degree": 1, "seed": 3, "max_epochs": 50},
            "store": str(tmp_path / "store"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        cfg = AppConfig.from_file(str(path))
        create_app(cfg)
        assert cfg.pipeline.protocol == "holdout"

    def test_explicit_protocol_is_respected(self, small_config_path):
        cfg = AppConfig.from_file(str(small_config_path))
        create_app(cfg)
        assert cfg.pipeline.protocol == "paper"


class TestPredictWithMatchingSchema(object):
    def test_full_predict_flow_on_schema_cohort(self, tmp_path):
        # cohort drawn over the bundled schema columns so /predict lines up
        config = {
            "pipeline": {"degree": 1, "seed": 3, "max_epochs": 120},
            "synth": {"n_total": 200, "n_abnormal": 20},
            "store": str(tmp_path / "store"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        cfg = AppConfig.from_file(str(path))
        with TestClient(create_app(cfg)) as client:
            job = client.post("/train", json={}).json()
            body = wait_for_job(client, job["job_id"], timeout=120)
            assert body["status"] == "done"

            from zeromiss.schema import default_schema

            schema = default_schema()
            record = {}
            for spec in schema.feature_fields:
                if spec.kind == "numeric":
                    record[spec.name] = float(spec.bin_edges[0])
                else:
                    record[spec.name] = spec.values[0]
            response = client.post("/predict", json={"record": record})
            assert response.status_code == 200
            out = response.json()
            assert 0.0 <= out["p_abnormal"] <= 1.0
            assert out["decision"] in ("normal", "abnormal")
            assert out["threshold"] >= 0.5
