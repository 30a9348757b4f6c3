"""Command line entry point.

Subcommands:
    index   build the retrieval index and write it to disk
    eval    run the benchmark over the held-out split and write reports
    ask     answer a single question and print the result as JSON
    report  re-render a report from a previous eval's outcome file
    serve   start the HTTP service

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
problem, 3 backend unreachable or credentials missing, 4 the model
produced no usable query (ask only).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from nl2api.config import Config, ConfigError, load_config
from nl2api.corpus import lint_corpus, load_corpus, split_corpus
from nl2api.errors import Nl2ApiError
from nl2api.evaluator import EvalOutcome, aggregate, evaluate_sample, render_report
from nl2api.executor import Transport
from nl2api.gateway import Timeout, Unauthorized, UpstreamError
from nl2api.query_model import Dialect
from nl2api.runtime import (
    CredentialsMissing,
    build_embedding_backend,
    build_runtime,
)
from nl2api.strategies import STRATEGIES, GenerationTrace, UnknownStrategy, generate
from nl2api.vectors import VectorError, build_index, save_index

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_NO_QUERY = 4

# Notes with these prefixes mean the backend failed, not the model.
BACKEND_FAILURE_PREFIXES = ("completion failed", "entity extraction failed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nl2api",
        description="Translate natural language questions into Land Matrix API queries.",
    )
    parser.add_argument("--config", metavar="PATH", help="YAML config file")
    parser.add_argument(
        "--mode",
        choices=("live", "cassette", "record"),
        help="override run.mode from the config",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="embed the retrieval pool and save the index")
    p_index.add_argument("--out", metavar="PATH", help="index file to write (default: paths.index)")

    p_eval = sub.add_parser("eval", help="run the benchmark and write outcome and report files")
    p_eval.add_argument("--out-dir", metavar="DIR", help="output directory (default: paths.out_dir)")
    p_eval.add_argument("--resume", action="store_true", help="skip samples already in outcomes.jsonl")
    p_eval.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel generations")
    p_eval.add_argument("--limit", type=int, metavar="N", help="cap samples per combination")

    p_ask = sub.add_parser("ask", help="answer one question and print JSON")
    p_ask.add_argument("question")
    p_ask.add_argument("--strategy", default="prompt_engineering")
    p_ask.add_argument("--model", help="model name (default: first of llm.models)")
    p_ask.add_argument("--dialect", default="REST", choices=[d.value for d in Dialect])
    p_ask.add_argument(
        "--no-execute", action="store_true", help="generate the query but do not run it"
    )

    p_report = sub.add_parser("report", help="render a report from an outcomes file")
    p_report.add_argument("--outcomes", required=True, metavar="PATH")
    p_report.add_argument("--format", default="markdown", choices=("markdown", "csv"))
    p_report.add_argument("--averaging", default="micro", choices=("micro", "macro"))
    p_report.add_argument("--decimals", type=int, default=0, choices=(0, 2))
    p_report.add_argument("--out", metavar="PATH", help="write to a file instead of stdout")

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        handler = {
            "index": cmd_index,
            "eval": cmd_eval,
            "ask": cmd_ask,
            "report": cmd_report,
            "serve": cmd_serve,
        }[args.command]
        return handler(config, args)
    except (ConfigError, UnknownStrategy) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (CredentialsMissing, Timeout, Unauthorized, UpstreamError, Transport) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BACKEND
    except (Nl2ApiError, VectorError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


def cmd_index(config: Config, args: argparse.Namespace) -> int:
    out = args.out or config.paths.index
    if not out:
        raise ConfigError("no index target: pass --out or set paths.index")
    if not config.paths.corpus:
        raise ConfigError("paths.corpus is not configured")
    corpus = load_corpus(config.paths.corpus)
    dev, _ = split_corpus(corpus, config.run.test_fraction, config.run.seed)
    pool = dev if config.rag.retrieve_from == "dev" else corpus
    backend = build_embedding_backend(config)
    index = build_index([(e.id, e.question) for e in pool], backend)
    save_index(index, out)
    print(
        f"indexed {len(index.entry_ids)} questions with {backend.backend_id} "
        f"(dimension {backend.dimension}) -> {out}"
    )
    return EXIT_OK


def _needs_retrieval(strategies: tuple[str, ...]) -> bool:
    return any(s in ("rag", "agentic") for s in strategies)


def _combo_tasks(runtime, limit: int | None):
    """Fixed-order task list: strategy, then model, then dialect, then entry."""
    tasks = []
    for strategy in runtime.config.run.strategies:
        for model in runtime.config.llm.models:
            for dialect_name in runtime.config.run.dialects:
                dialect = Dialect(dialect_name)
                n = 0
                for entry in runtime.test:
                    if entry.query_for(dialect) is None:
                        continue
                    if limit is not None and n >= limit:
                        break
                    tasks.append((strategy, model, dialect, entry))
                    n += 1
    return tasks


def cmd_eval(config: Config, args: argparse.Namespace) -> int:
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    runtime = build_runtime(config, args.mode, with_retrieval=_needs_retrieval(config.run.strategies))

    for warning in lint_corpus(runtime.corpus, runtime.vocabulary):
        print(f"lint: {warning}", file=sys.stderr)

    out_dir = Path(args.out_dir or config.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcomes_path = out_dir / "outcomes.jsonl"

    done: set[tuple[str, str, str, str]] = set()
    if args.resume and outcomes_path.exists():
        with open(outcomes_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                r = json.loads(line)
                done.add((r["entry_id"], r["strategy"], r["model"], r["dialect"]))

    tasks = [
        t
        for t in _combo_tasks(runtime, args.limit)
        if (t[3].id, t[0], t[1], t[2].value) not in done
    ]

    deps = runtime.generation_deps()

    def worker(task) -> EvalOutcome:
        strategy, model, dialect, entry = task
        trace = generate(entry.question, strategy, dialect, model, deps)
        return evaluate_sample(
            entry,
            strategy,
            model,
            dialect,
            trace.extracted_query,
            runtime.executor,
            trace_digest=trace.digest(),
            notes=trace.notes,
        )

    n_new = 0
    with open(outcomes_path, "a" if args.resume else "w", encoding="utf-8") as fh:
        if args.jobs > 1:
            pool = ThreadPoolExecutor(max_workers=args.jobs)
            results = pool.map(worker, tasks)
        else:
            pool = None
            results = map(worker, tasks)
        try:
            # Results stream back in task order, so reruns write
            # byte-identical files.
            for outcome in results:
                fh.write(json.dumps(outcome.to_record(), ensure_ascii=False) + "\n")
                fh.flush()
                n_new += 1
        finally:
            if pool is not None:
                pool.shutdown()

    outcomes = _read_outcomes(outcomes_path)
    scored = [o for o in outcomes if o.unscored is None]
    rows = aggregate(outcomes)
    (out_dir / "report.md").write_text(render_report(rows, format="markdown"), encoding="utf-8")
    (out_dir / "report.csv").write_text(render_report(rows, format="csv"), encoding="utf-8")

    print(
        f"evaluated {n_new} new samples ({len(outcomes)} total, "
        f"{len(outcomes) - len(scored)} unscored); reports in {out_dir}"
    )
    if not scored:
        print("error: no sample produced a score", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _read_outcomes(path: Path) -> list[EvalOutcome]:
    outcomes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                outcomes.append(EvalOutcome.from_record(json.loads(line)))
    return outcomes


def cmd_ask(config: Config, args: argparse.Namespace) -> int:
    if args.strategy not in STRATEGIES:
        raise UnknownStrategy(args.strategy)
    model = args.model or config.llm.models[0]
    dialect = Dialect(args.dialect)
    runtime = build_runtime(
        config, args.mode, with_retrieval=_needs_retrieval((args.strategy,))
    )
    trace = generate(args.question, args.strategy, dialect, model, runtime.generation_deps())

    execution = None
    if trace.extracted_query and not args.no_execute:
        result = runtime.executor.execute(trace.extracted_query, dialect)
        execution = {
            "status": result.status,
            "valid": result.valid,
            "result_ids": sorted(result.result_ids),
            "warning": result.warning,
        }

    print(json.dumps(_ask_payload(args, model, trace, execution), ensure_ascii=False, indent=2))

    if trace.extracted_query is None:
        if any(n.startswith(BACKEND_FAILURE_PREFIXES) for n in trace.notes):
            return EXIT_BACKEND
        return EXIT_NO_QUERY
    return EXIT_OK


def _ask_payload(
    args: argparse.Namespace, model: str, trace: GenerationTrace, execution: dict | None
) -> dict:
    return {
        "question": args.question,
        "strategy": args.strategy,
        "model": model,
        "dialect": args.dialect,
        "query": trace.extracted_query,
        "retrieved_ids": None if trace.retrieved_ids is None else list(trace.retrieved_ids),
        "notes": list(trace.notes),
        "execution": execution,
    }


def cmd_report(config: Config, args: argparse.Namespace) -> int:
    path = Path(args.outcomes)
    if not path.exists():
        raise ConfigError(f"outcomes file not found: {path}")
    rows = aggregate(_read_outcomes(path), averaging=args.averaging)
    text = render_report(rows, format=args.format, decimals=args.decimals)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_serve(config: Config, args: argparse.Namespace) -> int:
    import uvicorn

    from nl2api.service import create_app

    app = create_app(config, mode=args.mode)
    uvicorn.run(
        app,
        host=args.host or config.service.host,
        port=args.port if args.port is not None else config.service.port,
    )
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
