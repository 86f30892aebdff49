#!/usr/bin/env python3
"""Record facade exchanges for the browser console's contract tests.

Drives a real statistics server + session facade through exactly the
request sequence the console issues (connect, inspect, explain, add
virtual index with auto re-explain + diff, drops, parse error) and writes
every request/response pair to frontend/fixtures/recorded_facade.json.
Rerun after any deliberate facade change:

    python3 scripts/record_facade_fixtures.py
"""

import json
import sys
from pathlib import Path

import httpx

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from videx.api import FacadeServer
from videx.catalog import snapshot_to_doc
from videx.collector import CollectConfig, collect_snapshot
from videx.stat_server import StatsServer

from _synth import make_three_table_db

BASE_SQL = "SELECT * FROM users WHERE u_score BETWEEN 10.0 AND 10.05"
JOIN_SQL = ("SELECT * FROM users JOIN orders ON u_id = o_uid "
            "WHERE u_age < 30")
BAD_SQL = "SELECT * FROM users WHERE u_age LIKE 1"


def build_metadata() -> dict:
    snapshot = collect_snapshot(make_three_table_db(seed=101, scale=1200),
                                CollectConfig(bucket_count=16))
    doc = snapshot_to_doc(snapshot)
    for table in doc["tables"]:
        table.pop("sample", None)  # console scenario never needs samples
        if table["name"] == "users":
            # keep one column without a histogram: the placeholder case
            table["column_stats"]["u_city"]["histogram"] = None
    return doc


class Recorder:
    def __init__(self, base_url: str):
        self.base_url = base_url
        self.exchanges = []

    def call(self, name: str, method: str, path: str, body=None,
             expect_status: int = 200) -> dict:
        response = httpx.request(
            method, self.base_url + path,
            content=json.dumps(body).encode() if body is not None else None,
            headers={"Content-Type": "application/json"}
            if body is not None else {})
        assert response.status_code == expect_status, \
            f"{name}: {response.status_code} {response.text[:300]}"
        parsed = response.json()
        self.exchanges.append({
            "name": name,
            "request": {"method": method, "path": path, "body": body},
            "response": {"status": response.status_code, "body": parsed},
        })
        return parsed


def main() -> None:
    metadata = build_metadata()
    with StatsServer() as stats, FacadeServer(stats_url=stats.url) as facade:
        rec = Recorder(facade.url)
        # the sequence below mirrors frontend/test/console.test.ts 1:1
        session = rec.call("create_session", "POST", "/v1/sessions",
                           {"metadata": metadata, "model": "independence"})
        sid = session["session_id"]
        base = f"/v1/sessions/{sid}"
        rec.call("explain_join", "POST", f"{base}/explain", {"sql": JOIN_SQL})
        before = rec.call("explain_base", "POST", f"{base}/explain",
                          {"sql": BASE_SQL})
        rec.call("add_vindex", "POST", f"{base}/virtual-indexes",
                 {"table": "users", "columns": ["u_score"]})
        after = rec.call("explain_after_add", "POST", f"{base}/explain",
                         {"sql": BASE_SQL})
        diff = rec.call("diff_add", "POST", "/v1/diff",
                        {"a": before, "b": after})
        assert diff["total_cost_delta"] < 0, "crafted fixture must win"
        assert after["operators"][0]["access_path"]["origin"] == "virtual"
        rec.call("drop_vindex", "DELETE",
                 f"{base}/virtual-indexes/vidx_users_u_score")
        restored = rec.call("explain_after_drop", "POST", f"{base}/explain",
                            {"sql": BASE_SQL})
        rec.call("diff_drop", "POST", "/v1/diff",
                 {"a": after, "b": restored})
        assert restored["signature"] == before["signature"]
        rec.call("add_unused_vindex", "POST", f"{base}/virtual-indexes",
                 {"table": "items", "columns": ["i_price"],
                  "name": "tmp_unused"})
        unchanged = rec.call("explain_with_unused", "POST", f"{base}/explain",
                             {"sql": BASE_SQL})
        diff_unused = rec.call("diff_unused_add", "POST", "/v1/diff",
                               {"a": restored, "b": unchanged})
        assert unchanged["signature"] == restored["signature"]
        assert diff_unused["total_cost_delta"] == 0
        rec.call("drop_unused_vindex", "DELETE",
                 f"{base}/virtual-indexes/tmp_unused")
        final = rec.call("explain_after_unused_drop", "POST",
                         f"{base}/explain", {"sql": BASE_SQL})
        rec.call("diff_unused_drop", "POST", "/v1/diff",
                 {"a": unchanged, "b": final})
        rec.call("explain_parse_error", "POST", f"{base}/explain",
                 {"sql": BAD_SQL}, expect_status=400)
        rec.call("get_session", "GET", base)
        out_dir = ROOT / "frontend" / "fixtures"
        out_dir.mkdir(parents=True, exist_ok=True)
        out = out_dir / "recorded_facade.json"
        out.write_text(json.dumps({"base_sql": BASE_SQL, "join_sql": JOIN_SQL,
                                   "bad_sql": BAD_SQL, "session_id": sid,
                                   "exchanges": rec.exchanges},
                                  indent=2, sort_keys=True) + "\n")
        print(f"wrote {out} ({len(rec.exchanges)} exchanges, "
              f"{out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
