#!/usr/bin/env python3
"""Regenerate the protocol golden files under tests/golden/.

Run from the repository root after any deliberate protocol change:

    python3 scripts/gen_goldens.py
"""

import json
import sys
from pathlib import Path

import httpx

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from videx.catalog import snapshot_to_doc
from videx.collector import CollectConfig, collect_snapshot
from videx.stat_server import StatsServer

from _synth import make_three_table_db


def build_exchanges() -> list[dict]:
    snapshot = collect_snapshot(make_three_table_db(scale=120),
                                CollectConfig(bucket_count=8))
    doc = snapshot_to_doc(snapshot)
    age_cond = {"col_name": "u_age", "data_type": "int",
                "min_value": {"type": "int", "value": 20},
                "max_value": {"type": "int", "value": 40},
                "min_operator": ">=", "max_operator": "<="}
    id_cond = {"col_name": "u_id", "data_type": "int",
               "min_value": {"type": "int", "value": 5},
               "max_value": None,
               "min_operator": ">=", "max_operator": None}
    card = {"task_id": "golden", "table": "users",
            "conditions": [age_cond, id_cond]}
    card_swapped = {"task_id": "golden", "table": "users",
                    "conditions": [id_cond, age_cond]}
    return [
        {"name": "load_task", "method": "POST",
         "path": "/v1/tasks/golden/stats?model=independence", "body": doc},
        {"name": "load_task_idempotent", "method": "POST",
         "path": "/v1/tasks/golden/stats?model=independence", "body": doc},
        {"name": "cardinality_miss", "method": "POST",
         "path": "/v1/cardinality", "body": card},
        {"name": "cardinality_hit", "method": "POST",
         "path": "/v1/cardinality", "body": card},
        {"name": "cardinality_permuted_hit", "method": "POST",
         "path": "/v1/cardinality", "body": card_swapped},
        {"name": "ndv", "method": "POST", "path": "/v1/ndv",
         "body": {"task_id": "golden", "table": "orders",
                  "columns": ["o_uid"]}},
        {"name": "ndv_joint", "method": "POST", "path": "/v1/ndv",
         "body": {"task_id": "golden", "table": "orders",
                  "columns": ["o_uid", "o_day"]}},
        {"name": "task_log", "method": "GET",
         "path": "/v1/tasks/golden/log", "body": None},
        {"name": "health", "method": "GET", "path": "/v1/health", "body": None},
        {"name": "unknown_task", "method": "POST", "path": "/v1/cardinality",
         "body": {"task_id": "ghost", "table": "users", "conditions": []}},
        {"name": "malformed_condition", "method": "POST",
         "path": "/v1/cardinality",
         "body": {"task_id": "golden", "table": "users",
                  "conditions": [{"col_name": "u_age", "data_type": "int",
                                  "min_value": {"type": "int", "value": 1},
                                  "min_operator": "between"}]}},
        {"name": "unknown_endpoint", "method": "POST", "path": "/v1/nope",
         "body": {}},
    ]


def main() -> None:
    golden_dir = ROOT / "tests" / "golden"
    golden_dir.mkdir(exist_ok=True)
    exchanges = build_exchanges()
    with StatsServer() as server:
        for exchange in exchanges:
            response = httpx.request(
                exchange["method"], server.url + exchange["path"],
                content=json.dumps(exchange["body"]).encode()
                if exchange["body"] is not None else None)
            exchange["status"] = response.status_code
            exchange["response"] = response.json()
    out = golden_dir / "stat_server_exchanges.json"
    out.write_text(json.dumps({"exchanges": exchanges}, indent=2,
                              sort_keys=True) + "\n")
    print(f"wrote {out} ({len(exchanges)} exchanges)")


if __name__ == "__main__":
    main()
