"""HTTP service exposing question answering over the loaded corpus.

Endpoints:
    POST /ask     translate one question, optionally execute the query
    GET  /health  liveness and corpus summary; never calls upstreams
    GET  /config  the active configuration (credentials never appear)
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from nl2api import __version__
from nl2api.config import Config
from nl2api.errors import Nl2ApiError
from nl2api.executor import ApiCassetteMiss, ExecutionResult, Transport
from nl2api.query_model import Dialect, QueryModelError, parse
from nl2api.runtime import Runtime, build_runtime
from nl2api.strategies import STRATEGIES, generate

# Notes with these prefixes mean an upstream failed, not the model.
UPSTREAM_FAILURE_PREFIXES = ("completion failed", "entity extraction failed")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(config: Config, mode: str | None = None, runtime: Runtime | None = None) -> FastAPI:
    """Build the application; a prebuilt runtime may be injected in tests."""
    if runtime is None:
        runtime = build_runtime(config, mode)
    app = FastAPI(title="nl2api", version=__version__)
    if config.service.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.service.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "mode": runtime.mode,
            "corpus_entries": len(runtime.corpus),
            "models": list(config.llm.models),
            "strategies": list(STRATEGIES),
        }

    @app.get("/config")
    def public_config() -> dict:
        return config.public_dict()

    @app.post("/ask")
    async def ask(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")

        question = body.get("question")
        if not isinstance(question, str) or not question.strip():
            return _error(400, "'question' must be a non-empty string")

        strategy = body.get("strategy", "prompt_engineering")
        if strategy not in STRATEGIES:
            return _error(400, f"unknown strategy {strategy!r}")

        model = body.get("model") or config.llm.models[0]
        if model not in config.llm.models:
            return _error(400, f"unknown model {model!r}")

        dialect_name = body.get("dialect", "REST")
        try:
            dialect = Dialect(dialect_name)
        except ValueError:
            return _error(400, f"unknown dialect {dialect_name!r}")

        execute = body.get("execute", True)
        if not isinstance(execute, bool):
            return _error(400, "'execute' must be a boolean")

        try:
            trace = generate(question, strategy, dialect, model, runtime.generation_deps())
        except Nl2ApiError as err:
            return _error(500, str(err))

        upstream_notes = [n for n in trace.notes if n.startswith(UPSTREAM_FAILURE_PREFIXES)]
        if trace.extracted_query is None and upstream_notes:
            return _error(502, upstream_notes[0])

        payload = {
            "question": question,
            "strategy": strategy,
            "model": model,
            "dialect": dialect.value,
            "query": trace.extracted_query,
            "valid": False,
            "notes": list(trace.notes),
            "results": None,
        }
        if trace.extracted_query is None:
            return JSONResponse(content=payload)

        if not execute:
            payload["valid"] = _parses(trace.extracted_query, dialect)
            return JSONResponse(content=payload)

        try:
            result = runtime.executor.execute(trace.extracted_query, dialect)
        except (Transport, ApiCassetteMiss) as err:
            return _error(502, str(err))
        except Nl2ApiError as err:
            return _error(500, str(err))

        payload["valid"] = result.valid
        payload["results"] = _result_payload(result, config.service.result_cap)
        return JSONResponse(content=payload)

    return app


def _parses(query_text: str, dialect: Dialect) -> bool:
    try:
        parse(query_text, dialect)
    except QueryModelError:
        return False
    return True


def _result_payload(result: ExecutionResult, cap: int) -> dict:
    ids = sorted(result.result_ids)
    return {
        "count": len(ids),
        "ids": ids[:cap],
        "truncated": len(ids) > cap,
        "status": result.status,
        "warning": result.warning,
    }
