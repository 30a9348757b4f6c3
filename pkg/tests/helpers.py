"""Workspace scaffolding shared by the CLI and service tests.

make_workspace writes a small corpus, vocabulary, schema context and
config into a directory, then records LLM and API cassettes by driving
the real generation code against a planned backend. Tests exercise the
shipped replay path end to end without any network.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from nl2api.config import load_config
from nl2api.executor import ApiCassette, cassette_key
from nl2api.gateway import CassetteStore, ChatResponse
from nl2api.query_model import Dialect
from nl2api.runtime import build_runtime
from nl2api.strategies import generate

VOCAB = """\
area_min:
  kind: numeric
  description: Lower area bound in hectares.
country_id:
  kind: identifier
  description: Numeric country id.
negotiation_status:
  kind: enumerated
  description: Deal negotiation stage.
  values: [CONTRACT_SIGNED, CONTRACT_CANCELED]
limit:
  kind: numeric
  description: Maximum records returned.
"""

SCHEMA = """\
schema: |
  /api/deals/ lists deals; GraphQL root field deals(...) { id }.
rules: |
  - Reply with one query and nothing else.
examples:
  REST:
    - question: Signed deals?
      query: /api/deals/?negotiation_status=CONTRACT_SIGNED
  GRAPHQL:
    - question: Signed deals?
      query: "query { deals(negotiation_status: CONTRACT_SIGNED) { id } }"
"""

ENTRIES = [
    ("a", "Deals over 100 hectares?", "/api/deals/?area_min=100", "query { deals(area_min: 100) { id } }"),
    ("b", "Deals in country 4?", "/api/deals/?country_id=4", "query { deals(country_id: 4) { id } }"),
    ("c", "Deals over 900 hectares?", "/api/deals/?area_min=900", "query { deals(area_min: 900) { id } }"),
    ("d", "Deals in country 8?", "/api/deals/?country_id=8", "query { deals(country_id: 8) { id } }"),
    ("e", "Canceled deals?", "/api/deals/?negotiation_status=CONTRACT_CANCELED", "query { deals(negotiation_status: CONTRACT_CANCELED) { id } }"),
    ("f", "First 5 deals?", "/api/deals/?limit=5", "query { deals(limit: 5) { id } }"),
]

CONFIG = """\
llm:
  cassette: llm.jsonl
  models: [Llama3-8B]
api:
  cassette: api.jsonl
rag:
  k: 2
run:
  mode: cassette
  seed: 3
  test_fraction: 0.5
  strategies: [prompt_engineering]
  dialects: [REST, GRAPHQL]
paths:
  corpus: corpus.jsonl
  vocabulary: vocabulary.yaml
  schema_context: schema.yaml
  out_dir: runs
service:
  result_cap: 2
"""


class PlannedBackend:
    """Returns scripted texts per question and records every exchange."""

    kind = "scripted"

    def __init__(self, queues: dict[str, list[str]], store: CassetteStore):
        self.queues = {q: list(texts) for q, texts in queues.items()}
        self.store = store

    def complete(self, request):
        question = request.messages[-1].content.split("\n\n", 1)[0]
        text = self.queues[question].pop(0)
        self.store.append(request, text)
        return ChatResponse(text=text, model=request.model, latency_ms=0.0, backend="scripted")


def default_llm_rows():
    """One perfect completion per entry and dialect, plus a refusal."""
    rows = []
    for _, question, rest, graphql in ENTRIES:
        rows.append(("prompt_engineering", "Llama3-8B", "REST", question, [rest]))
        rows.append(("prompt_engineering", "Llama3-8B", "GRAPHQL", question, [graphql]))
    rows.append(
        ("prompt_engineering", "Llama3-8B", "REST", "Nonsense question?", ["I cannot write that query, sorry."])
    )
    return rows


def default_api_rows():
    rows = []
    for n, (_, _, rest, graphql) in enumerate(ENTRIES, start=1):
        ids = [{"id": n}, {"id": n + 100}]
        if n == 1:
            ids.append({"id": 999})
        rows.append(("REST", rest, 200, ids))
        rows.append(("GRAPHQL", graphql, 200, {"data": {"deals": ids}}))
    return rows


def make_workspace(tmp_path: Path, llm_rows=None, api_rows=None, config_text=None) -> Path:
    """Write data files and cassettes; returns the config path."""
    corpus_lines = [
        json.dumps(
            {"id": i, "question": q, "rest_query": r, "graphql_query": g},
            ensure_ascii=False,
        )
        for i, q, r, g in ENTRIES
    ]
    (tmp_path / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n")
    (tmp_path / "vocabulary.yaml").write_text(VOCAB)
    (tmp_path / "schema.yaml").write_text(SCHEMA)
    (tmp_path / "llm.jsonl").write_text("")
    (tmp_path / "api.jsonl").write_text("")
    config_path = tmp_path / "config.yaml"
    config_path.write_text(config_text or CONFIG)

    config = load_config(config_path)
    runtime = build_runtime(config)

    store = CassetteStore(Path(config.llm.cassette))
    for strategy, model, dialect_name, question, responses in (
        default_llm_rows() if llm_rows is None else llm_rows
    ):
        backend = PlannedBackend({question: responses}, store)
        deps = replace(runtime.generation_deps(), backend=backend)
        generate(question, strategy, Dialect(dialect_name), model, deps)

    api_cassette = ApiCassette(Path(config.api.cassette))
    for dialect_name, query_text, status, body in (
        default_api_rows() if api_rows is None else api_rows
    ):
        dialect = Dialect(dialect_name)
        body_text = body if isinstance(body, str) else json.dumps(body)
        api_cassette.append(cassette_key(query_text, dialect), dialect, status, body_text)

    return config_path
