"""Session facade endpoints: the surface the web console drives."""

import json

import httpx
import pytest

from videx.api import FacadeServer
from videx.catalog import snapshot_to_doc
from videx.collector import CollectConfig, collect_snapshot
from videx.stat_server import StatsServer

from _synth import make_three_table_db


@pytest.fixture(scope="module")
def stack():
    with StatsServer() as stats:
        with FacadeServer(stats_url=stats.url) as facade:
            yield facade


@pytest.fixture(scope="module")
def metadata_doc():
    return snapshot_to_doc(collect_snapshot(make_three_table_db(scale=1200),
                                            CollectConfig(bucket_count=8)))


@pytest.fixture()
def session_id(stack, metadata_doc):
    response = httpx.post(f"{stack.url}/v1/sessions",
                          json={"metadata": metadata_doc,
                                "model": "independence"})
    assert response.status_code == 200, response.text
    return response.json()["session_id"]


class TestSessionEndpoints:
    def test_create_returns_tables_with_stats(self, stack, metadata_doc):
        response = httpx.post(f"{stack.url}/v1/sessions",
                              json={"metadata": metadata_doc,
                                    "model": "independence"})
        body = response.json()
        assert response.status_code == 200
        names = [t["name"] for t in body["tables"]]
        assert names == ["items", "orders", "users"]
        users = body["tables"][2]
        assert users["row_count"] == 1200
        age = next(c for c in users["columns"] if c["name"] == "u_age")
        assert age["ndv"] > 0
        assert sum(b["row_fraction"]
                   for b in age["histogram"]["buckets"]) == pytest.approx(1.0)

    def test_get_session(self, stack, session_id):
        response = httpx.get(f"{stack.url}/v1/sessions/{session_id}")
        assert response.status_code == 200
        assert response.json()["session_id"] == session_id

    def test_unknown_session_404(self, stack):
        response = httpx.get(f"{stack.url}/v1/sessions/ghost")
        assert response.status_code == 404
        assert response.json()["code"] == "UNKNOWN_SESSION"

    def test_missing_metadata_400(self, stack):
        response = httpx.post(f"{stack.url}/v1/sessions", json={"model": "x"})
        assert response.status_code == 400

    def test_explain_flow(self, stack, session_id):
        response = httpx.post(
            f"{stack.url}/v1/sessions/{session_id}/explain",
            json={"sql": "SELECT * FROM users WHERE u_age < 30"})
        assert response.status_code == 200
        doc = response.json()
        assert doc["join_order"] == ["users"]
        assert doc["operators"][0]["candidates"]

    def test_explain_sql_error_code(self, stack, session_id):
        response = httpx.post(
            f"{stack.url}/v1/sessions/{session_id}/explain",
            json={"sql": "SELECT * FROM users WHERE u_age LIKE 3"})
        assert response.status_code == 400
        assert response.json()["code"] == "SQL_ERROR"

    def test_virtual_index_lifecycle_and_diff(self, stack, session_id):
        sql = "SELECT * FROM users WHERE u_score BETWEEN 10.0 AND 10.05"
        base = f"{stack.url}/v1/sessions/{session_id}"
        before = httpx.post(f"{base}/explain", json={"sql": sql}).json()
        created = httpx.post(f"{base}/virtual-indexes",
                             json={"table": "users", "columns": ["u_score"]})
        assert created.status_code == 200
        assert created.json()["origin"] == "virtual"
        after = httpx.post(f"{base}/explain", json={"sql": sql}).json()
        diff = httpx.post(f"{stack.url}/v1/diff",
                          json={"a": before, "b": after}).json()
        assert diff["total_cost_delta"] < 0
        dropped = httpx.request("DELETE",
                                f"{base}/virtual-indexes/vidx_users_u_score")
        assert dropped.status_code == 200
        again = httpx.post(f"{base}/explain", json={"sql": sql}).json()
        assert again["signature"] == before["signature"]

    def test_duplicate_virtual_index_rejected(self, stack, session_id):
        base = f"{stack.url}/v1/sessions/{session_id}"
        httpx.post(f"{base}/virtual-indexes",
                   json={"table": "users", "columns": ["u_age"],
                         "name": "dup_idx"})
        response = httpx.post(f"{base}/virtual-indexes",
                              json={"table": "users", "columns": ["u_age"],
                                    "name": "dup_idx"})
        assert response.status_code == 400
        assert response.json()["code"] == "WHATIF_ERROR"

    def test_diff_endpoint_validates_body(self, stack):
        response = httpx.post(f"{stack.url}/v1/diff", json={"a": 1, "b": 2})
        assert response.status_code == 400

    def test_health(self, stack):
        response = httpx.get(f"{stack.url}/v1/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_invalid_metadata_rejected(self, stack, metadata_doc):
        bad = json.loads(json.dumps(metadata_doc))
        bad["tables"][0]["page_count"] += 3
        response = httpx.post(f"{stack.url}/v1/sessions",
                              json={"metadata": bad, "model": "independence"})
        assert response.status_code == 400
        assert response.json()["code"] == "VALIDATION"
