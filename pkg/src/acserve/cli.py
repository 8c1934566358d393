"""Command-line interface.

Verbs: serve, ingest, query, bench latency, bench retrieval, audit.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from .audit import DEFAULT_N_VALUES, audit_corpus, read_jsonl, write_csv, write_json_report
from .embedding import chunk_document, tokenize
from .errors import AcServeError
from .service import Service, ServiceState, build_embedder, load_config
from .store import EmbeddedChunk, VectorStore


def _parse_range(spec: str) -> list[int]:
    """Adapter-count sweeps: '1..10', '4', or '1,2,5'."""
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in spec:
        return [int(part) for part in spec.split(",")]
    return [int(spec)]


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    # accepted both before and after the verb; SUPPRESS keeps a verb-level
    # omission from clobbering a value given at the top level
    parser.add_argument(
        "--config", default=argparse.SUPPRESS, help="service config JSON (or set AC_CONFIG)"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acserve")
    parser.set_defaults(config=None)
    _add_config_flag(parser)
    sub = parser.add_subparsers(dest="verb", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    _add_config_flag(serve)
    serve.add_argument("--listen", help="host:port (overrides config)")

    ingest = sub.add_parser("ingest", help="chunk, embed, and insert documents")
    _add_config_flag(ingest)
    ingest.add_argument("docs_dir", help="directory of UTF-8 text files")
    ingest.add_argument("--tag", required=True, help="adapter id to tag the chunks with")
    ingest.add_argument("--store", help="store path (overrides config)")
    ingest.add_argument("--chunk-size", type=int, default=100)
    ingest.add_argument("--dim", type=int, help="builtin embedder dim for a new store")
    ingest.add_argument("--seed", type=int, help="builtin embedder seed")

    query = sub.add_parser("query", help="run one query against local state")
    _add_config_flag(query)
    query.add_argument("--user", required=True)
    query.add_argument("--text", required=True)
    query.add_argument("--k", type=int)
    query.add_argument("--fetch-k", type=int, dest="fetch_k")
    query.add_argument("--threshold", type=float)
    query.add_argument("--no-hints", action="store_true")

    bench = sub.add_parser("bench", help="benchmarks")
    bench_sub = bench.add_subparsers(dest="bench_kind", required=True)
    latency = bench_sub.add_parser("latency", help="TTFT vs active adapter count")
    latency.add_argument("--adapters", default="1..10", help="sweep, e.g. 1..10")
    latency.add_argument("--repeats", type=int, default=40)
    latency.add_argument("--warmup", type=int, default=5)
    latency.add_argument("--seed", type=int, default=7)
    latency.add_argument("--out", help="CSV path (default stdout)")
    retrieval = bench_sub.add_parser("retrieval", help="correct-adapter hit rate per topic")
    retrieval.add_argument("--corpus", required=True, help="topic corpus directory")
    retrieval.add_argument("--dim", type=int, default=256)
    retrieval.add_argument("--seed", type=int, default=0)
    retrieval.add_argument("--fetch-k", type=int, default=10, dest="fetch_k")
    retrieval.add_argument("--k", type=int, default=3)
    retrieval.add_argument("--chunk-size", type=int, default=100)
    retrieval.add_argument("--out", help="CSV path (default stdout)")

    audit = sub.add_parser("audit", help="memorization scores for predictions")
    audit.add_argument("--pred", required=True, help="predictions JSONL ({'id','text'})")
    audit.add_argument("--train", required=True, help="training JSONL ({'id','text'})")
    audit.add_argument("--n", type=int, action="append", help="minimum run length; repeatable")
    audit.add_argument("--workers", type=int)
    audit.add_argument("--out", help="CSV path (default stdout)")
    audit.add_argument("--json-report", help="also write a JSON report with intervals")
    return parser


def _cmd_serve(args) -> int:
    config = load_config(args.config, {"listen": args.listen})
    service = Service(config)
    service.bind()
    print(f"listening on {config.host}:{service.port}", file=sys.stderr, flush=True)
    service.serve_forever()
    return 0


def _cmd_ingest(args) -> int:
    config = load_config(args.config, {"store": args.store})
    if not config.store:
        print("ingest: no store path (use --store or config)", file=sys.stderr)
        return 1
    embedder_spec = dict(config.embedder)
    if args.dim is not None or args.seed is not None:
        builtin = dict(embedder_spec.get("builtin") or {})
        if args.dim is not None:
            builtin["dim"] = args.dim
        if args.seed is not None:
            builtin["seed"] = args.seed
        embedder_spec = {"builtin": builtin}
    embedder = build_embedder(embedder_spec)
    if os.path.exists(config.store):
        store = VectorStore.load(config.store)
    else:
        store = VectorStore(dim=embedder.dim)
    inserted = 0
    names = sorted(os.listdir(args.docs_dir))
    for name in names:
        path = os.path.join(args.docs_dir, name)
        if not os.path.isfile(path):
            continue
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        for chunk in chunk_document(text, args.chunk_size, doc_id=name):
            store.insert(
                EmbeddedChunk(chunk=chunk, embedding=embedder.embed(chunk.text), adapter_tag=args.tag)
            )
            inserted += 1
    store.save(config.store)
    print(f"ingested {inserted} chunks tagged {args.tag!r} into {config.store}")
    return 0


def _cmd_query(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    body = {"user_id": args.user, "query": args.text}
    if args.k is not None:
        body["k"] = args.k
    if args.fetch_k is not None:
        body["fetch_k"] = args.fetch_k
    if args.threshold is not None:
        body["threshold"] = args.threshold
    if args.no_hints:
        body["hints_enabled"] = False
    status, payload = state.handle_query(body)
    print(json.dumps(payload, indent=2))
    return 0 if status == 200 else 2


def _write_rows(rows, writer, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer(rows, fh)
    else:
        writer(rows, sys.stdout)


def _cmd_bench_latency(args) -> int:
    counts = _parse_range(args.adapters)
    rows = bench_mod.bench_latency(counts, repeats=args.repeats, warmup=args.warmup, seed=args.seed)
    _write_rows(rows, bench_mod.write_latency_csv, args.out)
    return 0


def _cmd_bench_retrieval(args) -> int:
    rows = bench_mod.bench_retrieval(
        args.corpus,
        dim=args.dim,
        seed=args.seed,
        fetch_k=args.fetch_k,
        k=args.k,
        chunk_size=args.chunk_size,
    )
    _write_rows(rows, bench_mod.write_retrieval_csv, args.out)
    return 0


def _cmd_audit(args) -> int:
    predictions = [(pid, tokenize(text)) for pid, text in read_jsonl(args.pred)]
    training = [tokenize(text) for _, text in read_jsonl(args.train)]
    n_values = [int(n) for n in (args.n or DEFAULT_N_VALUES)]
    rows = audit_corpus(predictions, training, n_values=n_values, workers=args.workers)
    _write_rows(rows, write_csv, args.out)
    if args.json_report:
        with open(args.json_report, "w", encoding="utf-8") as fh:
            write_json_report(rows, fh)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; the contract is 1
        return 0 if exc.code == 0 else 1
    try:
        if args.verb == "serve":
            return _cmd_serve(args)
        if args.verb == "ingest":
            return _cmd_ingest(args)
        if args.verb == "query":
            return _cmd_query(args)
        if args.verb == "bench":
            if args.bench_kind == "latency":
                return _cmd_bench_latency(args)
            return _cmd_bench_retrieval(args)
        if args.verb == "audit":
            return _cmd_audit(args)
        return 1
    except (AcServeError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"acserve {args.verb}: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
