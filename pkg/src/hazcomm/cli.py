"""Command line entry points: ingest, replay, serve, bench, bench-grid."""

from __future__ import annotations

import argparse
import json
import sys

from . import bench as bench_mod
from .clock import SystemClock
from .corpus import SourceKind, StreamSource, load_dictionary, open_stream, record_to_json
from .gateway import Pipeline, PipelineConfig, SourceSupervisor, bench_once
from .geoloc import Gazetteer, load_gazetteer
from .relay import DocumentStore


def _default_gazetteer() -> Gazetteer:
    from importlib import resources

    path = resources.files("hazcomm.data").joinpath("gazetteer_minimal.tsv")
    return load_gazetteer(str(path))


def _cmd_ingest(args) -> int:
    dictionary = load_dictionary(args.dict)
    if args.source == "synthetic":
        source = StreamSource(SourceKind.SYNTHETIC, seed=args.seed,
                              count=args.count, rate=args.rate)
    else:
        source = StreamSource(SourceKind.FILE_REPLAY, path=args.source, rate=args.rate)
    stream = open_stream(source, dictionary,
                         clock=SystemClock() if args.rate else None)
    for rec in stream:
        print(record_to_json(rec))
    print(
        f"accepted={stream.accepted} rejected={stream.rejected} "
        f"malformed={stream.malformed}",
        file=sys.stderr,
    )
    return 0


def _cmd_replay(args) -> int:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    dictionary = load_dictionary(args.dict)
    pipeline = Pipeline(config, _default_gazetteer())
    source = StreamSource(SourceKind.FILE_REPLAY, path=args.source)
    stream = open_stream(source, dictionary)
    total = 0
    for communities in pipeline.run_stream(stream):
        total += len(communities)
    print(pipeline.last_report)
    print(f"batches={pipeline.batches} communities_last_batch={total}",
          file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    dictionary = load_dictionary(args.dict)
    pipeline = Pipeline(config, _default_gazetteer())

    supervisor = None
    if args.source:
        source = StreamSource(SourceKind.FILE_REPLAY, path=args.source)

        def factory():
            return iter(open_stream(source, dictionary))

        supervisor = SourceSupervisor(factory, interval_s=config.liveness_interval_s)
        supervisor.start()

        import threading

        def drive():
            import queue as _q

            batch = []
            while True:
                try:
                    rec = supervisor.records.get(timeout=config.batch_cadence_s)
                    batch.append(rec)
                except _q.Empty:
                    pass
                if batch and (len(batch) >= config.batch_size or supervisor.finished):
                    pipeline._process_with_retry(batch)
                    batch = []
                if supervisor.finished and supervisor.records.empty() and not batch:
                    return

        threading.Thread(target=drive, daemon=True).start()

    app = create_app(pipeline.hub, pipeline, supervisor)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_bench(args) -> int:
    samples = []
    for run in range(args.runs):
        store = DocumentStore()
        samples.append(bench_once(store, args.writers, args.readers, seed=run))
    mean = sum(samples) / len(samples)
    var = sum((s - mean) ** 2 for s in samples) / (len(samples) - 1) if len(samples) > 1 else 0.0
    print(json.dumps({
        "writers": args.writers, "readers": args.readers, "runs": args.runs,
        "mean_s": round(mean, 6), "stdev_s": round(var ** 0.5, 6),
    }))
    return 0


def _cmd_bench_grid(args) -> int:
    sizes = [int(s) for s in args.grid.split(",")]
    reports = bench_mod.run_grid(sizes=sizes, runs=args.runs)
    if args.out:
        bench_mod.write_csv(reports, args.out)
    print(bench_mod.format_table(reports))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hazcomm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter a source through a hazard dictionary")
    p.add_argument("--source", required=True, help="JSONL path or 'synthetic'")
    p.add_argument("--dict", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--count", type=int, default=200)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("replay", help="run the full pipeline over a JSONL file")
    p.add_argument("--source", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="run the gateway HTTP/SSE service")
    p.add_argument("--config", default=None)
    p.add_argument("--dict", required=True)
    p.add_argument("--source", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("bench", help="one write/read scalability cell")
    p.add_argument("--writers", type=int, required=True)
    p.add_argument("--readers", type=int, required=True)
    p.add_argument("--runs", type=int, default=10)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("bench-grid", help="full write/read scalability grid")
    p.add_argument("--grid", default="100,1000,10000,100000")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench_grid)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
