"""Command-line interface.

Subcommands cover the whole workflow: ``collect`` statistics from CSV data,
``serve-stats`` / ``serve-api`` to run the two services, ``explain`` for a
one-shot what-if EXPLAIN, ``bench`` for two-mode plan-fidelity reports, and
``diff`` to compare saved EXPLAIN documents.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .api import FacadeServer
from .catalog import SAMPLE_CAP
from .collector import (
    CollectConfig,
    DEFAULT_BUCKET_COUNT,
    DEFAULT_SEED,
    collect_snapshot,
    load_data_dir,
)
from .catalog import serialize_metadata
from .errors import VidexError
from .stat_server import StatsServer
from .whatif import create_session, diff_plans, qerror_report

_VINDEX_RE = re.compile(r"^\s*(\w+)\s*\(\s*([\w\s,]+?)\s*\)\s*$")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VidexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videx",
        description="What-if index analysis over statistics-only replicas.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="compute a metadata file from CSV data")
    p.add_argument("--data", required=True, help="directory of <table>.csv + "
                   "<table>.schema.json files")
    p.add_argument("--out", required=True, help="metadata file to write")
    p.add_argument("--buckets", type=int, default=DEFAULT_BUCKET_COUNT)
    p.add_argument("--sample-cap", type=int, default=SAMPLE_CAP)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--page-size", type=int, default=16384)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("serve-stats", help="run the statistics server")
    p.add_argument("--port", type=int, default=8500)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-body-bytes", type=int, default=64 * 1024 * 1024)
    p.set_defaults(func=cmd_serve_stats)

    p = sub.add_parser("serve-api", help="run the session facade")
    p.add_argument("--port", type=int, default=8600)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--stats-url", required=True)
    p.add_argument("--max-body-bytes", type=int, default=64 * 1024 * 1024)
    p.set_defaults(func=cmd_serve_api)

    p = sub.add_parser("explain", help="one-shot what-if EXPLAIN")
    p.add_argument("--meta", required=True, help="metadata file")
    p.add_argument("--stats-url", help="statistics server URL; omitted: an "
                   "ephemeral in-process server is started")
    p.add_argument("--model", default="independence")
    p.add_argument("--sql", required=True)
    p.add_argument("--vindex", action="append", default=[],
                   metavar="table(col1,col2)",
                   help="virtual index to add before planning (repeatable)")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out", help="write the document here instead of stdout")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("bench", help="two-mode plan-fidelity report")
    p.add_argument("--workload", required=True,
                   help="SQL file (one statement per line) or JSON array")
    p.add_argument("--mode-a", required=True, metavar="meta=FILE,model=NAME",
                   help="reference mode, e.g. meta=db.json,model=oracle")
    p.add_argument("--mode-b", required=True, metavar="meta=FILE,model=NAME",
                   help="candidate mode, e.g. meta=db.json,model=independence")
    p.add_argument("--stats-url", help="omitted: ephemeral in-process server")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("diff", help="diff two saved EXPLAIN documents")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_diff)
    return parser


def cmd_collect(args) -> int:
    tables = load_data_dir(args.data)
    config = CollectConfig(bucket_count=args.buckets, sample_cap=args.sample_cap,
                           page_size=args.page_size, seed=args.seed)
    snapshot = collect_snapshot(tables, config)
    data = serialize_metadata(snapshot)
    Path(args.out).write_bytes(data)
    total_rows = sum(t.stats.row_count for t in snapshot.tables.values())
    print(f"wrote {args.out}: {len(snapshot.tables)} table(s), "
          f"{total_rows} row(s), {len(data)} bytes")
    return 0


def cmd_serve_stats(args) -> int:
    server = StatsServer(host=args.host, port=args.port,
                         max_body_bytes=args.max_body_bytes)
    print(f"statistics server listening on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_serve_api(args) -> int:
    server = FacadeServer(stats_url=args.stats_url, host=args.host,
                          port=args.port, max_body_bytes=args.max_body_bytes)
    print(f"session facade listening on {server.url} "
          f"(stats at {args.stats_url})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _ephemeral_stats(args):
    """Local stats server when no --stats-url is given; traffic still goes
    over HTTP, keeping the estimation path identical."""
    if args.stats_url:
        return None, args.stats_url
    server = StatsServer().start()
    return server, server.url


def cmd_explain(args) -> int:
    server, stats_url = _ephemeral_stats(args)
    try:
        session = create_session(Path(args.meta), args.model, stats_url)
        for spec in args.vindex:
            table, columns = _parse_vindex(spec)
            session.add_virtual_index(table, columns)
        document = session.explain_sql(args.sql)
        doc = document.to_doc()
        if args.out:
            Path(args.out).write_bytes(document.canonical_json())
        if args.format == "table":
            print(_explain_table(doc))
        elif not args.out:
            print(document.canonical_json().decode(), end="")
        return 0
    finally:
        if server is not None:
            server.stop()


def _parse_vindex(spec: str) -> tuple[str, list[str]]:
    m = _VINDEX_RE.match(spec)
    if m is None:
        raise VidexError(f"bad --vindex {spec!r}, want table(col1,col2)")
    return m.group(1), [c.strip() for c in m.group(2).split(",")]


def _explain_table(doc: dict) -> str:
    headers = ["#", "table", "access", "index", "rows_read", "est_rows", "cost"]
    rows = []
    for i, op in enumerate(doc["operators"], 1):
        path = op["access_path"]
        index = path["index"] or "-"
        if path["origin"] == "virtual":
            index += " (virtual)"
        rows.append([str(i), op["table"], path["kind"], index,
                     _fmt(path["est_rows"]), _fmt(op["est_rows"]),
                     _fmt(op["cost"])])
    lines = [_format_rows(headers, rows),
             f"total_cost: {_fmt(doc['total_cost'])}",
             f"signature:  {doc['signature']}"]
    return "\n".join(lines)


def _parse_mode(spec: str, default_model: str) -> tuple[Path, str]:
    parts = dict(item.split("=", 1) for item in spec.split(",") if "=" in item)
    if "meta" not in parts:
        raise VidexError(f"bad mode spec {spec!r}, want meta=FILE[,model=NAME]")
    return Path(parts["meta"]), parts.get("model", default_model)


def cmd_bench(args) -> int:
    workload = _load_workload(args.workload)
    meta_a, model_a = _parse_mode(args.mode_a, "oracle")
    meta_b, model_b = _parse_mode(args.mode_b, "independence")
    server, stats_url = _ephemeral_stats(args)
    try:
        mode_a = create_session(meta_a, model_a, stats_url)
        mode_b = create_session(meta_b, model_b, stats_url)
        report = qerror_report(workload, mode_a, mode_b)
        if args.out:
            Path(args.out).write_text(
                json.dumps(report, sort_keys=True, indent=2) + "\n")
        headers = ["queries", "compared", "join_order_match", "index_match",
                   "avg_q_error"]
        rows = [[str(report["queries"]), str(report["compared"]),
                 f"{report['match_rate_join_order']:.2%}",
                 f"{report['match_rate_index']:.2%}",
                 f"{report['avg_q_error']:.4f}"]]
        print(_format_rows(headers, rows))
        if report["errors"]:
            print(f"{len(report['errors'])} quer(ies) failed; see report")
        return 0
    finally:
        if server is not None:
            server.stop()


def _load_workload(path: str) -> list[str]:
    text = Path(path).read_text()
    if path.endswith(".json"):
        queries = json.loads(text)
        if not isinstance(queries, list):
            raise VidexError("workload JSON must be an array of SQL strings")
        return [str(q) for q in queries]
    lines = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#") and not line.startswith("--"):
            lines.append(line)
    return lines


def cmd_diff(args) -> int:
    doc_a = json.loads(Path(args.a).read_text())
    doc_b = json.loads(Path(args.b).read_text())
    diff = diff_plans(doc_a, doc_b)
    if args.format == "json":
        print(json.dumps(diff.to_doc(), sort_keys=True, indent=2))
    else:
        doc = diff.to_doc()
        print(f"join_order_equal:      {doc['join_order_equal']}")
        print(f"index_selection_equal: {doc['index_selection_equal']}")
        print(f"avg_q_error:           {doc['avg_q_error']:.4f}")
        print(f"total_cost:            {_fmt(doc['total_cost_a'])} -> "
              f"{_fmt(doc['total_cost_b'])} "
              f"(delta {_fmt(doc['total_cost_delta'])})")
        if doc["path_differences"]:
            headers = ["table", "a", "b"]
            rows = [[d["table"],
                     _fmt_path(d["a"]), _fmt_path(d["b"])]
                    for d in doc["path_differences"]]
            print(_format_rows(headers, rows))
    return 0


def _fmt_path(p) -> str:
    if p is None:
        return "-"
    return f"{p['kind']}({p['index'] or '-'})"


def _fmt(x: float) -> str:
    if isinstance(x, float) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.2f}" if isinstance(x, float) else str(x)


def _format_rows(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt_row(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt_row(headers), sep] + [fmt_row(r) for r in rows])


if __name__ == "__main__":
    sys.exit(main())
