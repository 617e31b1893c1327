"""Operator command line: ask, bench, record, replay, mock-serve,
validate-config.

Exit statuses: 0 success, 1 usage/config error, 2 runtime failure,
3 benchmark completed but some queries errored.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import clients
from .adjudication import outcome_record_json
from .benchmark import REPORT_FORMATS, aggregate, emit_report, load_corpus, score
from .clients import RecordingTape, ReplayStore
from .config import RunConfig, config_diagnostics, load_config, replay_committee
from .domain import make_query
from .errors import AdjudicationError, ConfigError, CouncilError, InsufficientCommitteeError
from .mockserver import MockPolicy, serve_forever
from .orchestrator import answer_batch, answer_query, build_manifest, manifest_json

_REPORT_FILES = {"json": "report.json", "csv": "report.csv", "table": "report.txt"}


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace(
        "+00:00", "Z"
    )


def _run_id(config_hash: str, corpus_name: str, started: str) -> str:
    return hashlib.sha256(
        f"{config_hash}:{corpus_name}:{started}".encode("utf-8")
    ).hexdigest()[:12]


def _apply_flag_overrides(args: argparse.Namespace, run: RunConfig) -> RunConfig:
    features = run.committee.features
    quality = run.committee.quality
    if args.confidence is not None:
        enabled = args.confidence == "on"
        features = replace(features, confidence_enabled=enabled)
        quality = replace(quality, require_confidence=enabled)
    if getattr(args, "fast_path", None) is not None:
        features = replace(features, fast_path_unanimous=args.fast_path == "on")
    committee = replace(run.committee, features=features, quality=quality)
    return replace(run, committee=committee)


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    run = load_config(args.config, seed=getattr(args, "seed", None))
    return _apply_flag_overrides(args, run)


def _write_outputs(
    out_dir: Path,
    manifest: dict,
    results,
    corpus,
    formats: list[str],
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(manifest_json(manifest), encoding="utf-8")
    records = score(results, corpus)
    if records:
        report = aggregate(records)
        for fmt in formats:
            (out_dir / _REPORT_FILES[fmt]).write_text(
                emit_report(report, fmt), encoding="utf-8"
            )


def _run_pipeline(
    run: RunConfig,
    corpus_path: Path,
    out_dir: Path,
    formats: list[str],
    parallelism: int,
    *,
    completer=clients.complete,
    run_meta: dict | None = None,
) -> tuple[dict, list, list]:
    corpus = load_corpus(corpus_path)
    started = run_meta["started"] if run_meta else _utc_now()
    results = answer_batch(corpus, run.committee, parallelism, completer=completer)
    finished = run_meta["finished"] if run_meta else _utc_now()
    run_id = (
        run_meta["run_id"]
        if run_meta
        else _run_id(run.config_hash, corpus_path.name, started)
    )
    manifest = build_manifest(run_id, run.config_hash, started, finished, results)
    return manifest, results, corpus


def _cmd_ask(args: argparse.Namespace) -> int:
    run = _load_run_config(args)
    query = make_query(
        args.query_id, args.question, args.option or (), category=args.category
    )
    try:
        outcome = answer_query(query, run.committee)
    except (InsufficientCommitteeError, AdjudicationError, CouncilError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(outcome_record_json(outcome))
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    run = _load_run_config(args)
    manifest, results, corpus = _run_pipeline(
        run, Path(args.corpus), Path(args.out), args.format, args.parallelism
    )
    had_errors = any("error" in record for record in manifest["outcomes"])
    _write_outputs(Path(args.out), manifest, results, corpus, args.format)
    return 3 if had_errors else 0


def _cmd_record(args: argparse.Namespace) -> int:
    run = _load_run_config(args)
    tape = RecordingTape()
    manifest, results, corpus = _run_pipeline(
        run,
        Path(args.corpus),
        Path(args.out),
        args.format,
        args.parallelism,
        completer=tape.wrap(clients.complete),
    )
    had_errors = any("error" in record for record in manifest["outcomes"])
    _write_outputs(Path(args.out), manifest, results, corpus, args.format)
    tape.write(
        args.fixture,
        {
            "run_id": manifest["run_id"],
            "config_hash": manifest["config_hash"],
            "started": manifest["started"],
            "finished": manifest["finished"],
        },
    )
    return 3 if had_errors else 0


def _cmd_replay(args: argparse.Namespace) -> int:
    run = _load_run_config(args)
    store = ReplayStore.load(args.fixture)
    meta = store.meta
    if meta.get("config_hash") != run.config_hash:
        print(
            f"error: fixture was recorded under config {meta.get('config_hash')!r}, "
            f"got {run.config_hash!r}",
            file=sys.stderr,
        )
        return 1
    committee = replay_committee(run.committee, args.fixture)
    run = replace(run, committee=committee)
    manifest, results, corpus = _run_pipeline(
        run,
        Path(args.corpus),
        Path(args.out),
        args.format,
        args.parallelism,
        run_meta=meta,
    )
    had_errors = any("error" in record for record in manifest["outcomes"])
    _write_outputs(Path(args.out), manifest, results, corpus, args.format)
    return 3 if had_errors else 0


def _cmd_mock_serve(args: argparse.Namespace) -> int:
    policy = MockPolicy.from_file(args.policy) if args.policy else MockPolicy()
    serve_forever(policy, args.host, args.port)
    return 0


def _cmd_validate_config(args: argparse.Namespace) -> int:
    diagnostics = config_diagnostics(args.config)
    if not diagnostics:
        print("ok")
        return 0
    for line in diagnostics:
        print(f"error: {line}", file=sys.stderr)
    return 1


def _add_common_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="committee config file")
    parser.add_argument("--seed", type=int, default=None, help="base scripted seed")
    parser.add_argument(
        "--confidence", choices=("on", "off"), default=None,
        help="override the confidence feature flag",
    )


def _add_bench_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus file to run")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--format", action="append", choices=REPORT_FORMATS, default=None,
        help="report format(s) to write (repeatable; default json)",
    )
    parser.add_argument("--parallelism", type=int, default=1, help="queries in flight")
    parser.add_argument(
        "--fast-path", dest="fast_path", choices=("on", "off"), default=None,
        help="override the unanimous fast-path flag",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelcouncil",
        description="Committee-of-models question answering pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="answer a single question")
    _add_common_run_flags(ask)
    ask.add_argument("--question", required=True)
    ask.add_argument(
        "--option", action="append", help="option text, repeat in order (1, 2, ...)"
    )
    ask.add_argument("--query-id", dest="query_id", default="adhoc")
    ask.add_argument("--category", default="Other")
    ask.add_argument(
        "--fast-path", dest="fast_path", choices=("on", "off"), default=None
    )
    ask.set_defaults(func=_cmd_ask)

    bench = sub.add_parser("bench", help="run a benchmark corpus")
    _add_common_run_flags(bench)
    _add_bench_flags(bench)
    bench.set_defaults(func=_cmd_bench)

    record = sub.add_parser(
        "record", help="run a benchmark while capturing completions to a fixture"
    )
    _add_common_run_flags(record)
    _add_bench_flags(record)
    record.add_argument("--fixture", required=True, help="fixture file to write")
    record.set_defaults(func=_cmd_record)

    replay_cmd = sub.add_parser(
        "replay", help="re-run a benchmark deterministically from a fixture"
    )
    _add_common_run_flags(replay_cmd)
    _add_bench_flags(replay_cmd)
    replay_cmd.add_argument("--fixture", required=True, help="fixture file to read")
    replay_cmd.set_defaults(func=_cmd_replay)

    serve = sub.add_parser(
        "mock-serve", help="serve scripted policies over the wire protocol"
    )
    serve.add_argument("--policy", default=None, help="mock policy file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_mock_serve)

    validate = sub.add_parser("validate-config", help="check a config file")
    validate.add_argument("--config", required=True)
    validate.set_defaults(func=_cmd_validate_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "format") and args.format is None:
        args.format = ["json"]
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CouncilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
