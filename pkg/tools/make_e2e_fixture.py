"""Regenerate the end-to-end replay fixture under tests/data/e2e/.

The fixture is a complete cassette-mode workspace: a 15-entry GraphQL
corpus, vocabulary, schema context, config, and recorded LLM and API
cassettes for one full agentic run over the held-out split. The twelve
held-out samples are designed to hit every scoring path: exact matches,
wrong values, missing and extra and wrong attributes, a filterless
query, a locally unparseable but API-accepted query, a refusal, a 400,
an error body, and a 500.

The expected numbers in expected_report.json were worked out by hand
from the designs below and are written here as literals. This script
never computes them; if a design and the expectation drift apart, the
acceptance test goes red and the design is what gets fixed.

Run from the repository root:

    python3 tools/make_e2e_fixture.py
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from nl2api.config import load_config
from nl2api.corpus import CorpusEntry, save_corpus, split_corpus
from nl2api.executor import ApiCassette, cassette_key
from nl2api.gateway import CassetteStore, ChatResponse
from nl2api.query_model import Dialect
from nl2api.runtime import build_runtime
from nl2api.strategies import generate

OUT_DIR = ROOT / "tests" / "data" / "e2e"
SEED = 7
TEST_FRACTION = 0.8
MODEL = "Codestral-22B"

VOCAB = """\
area_min:
  kind: numeric
  description: Lower bound on the deal area in hectares.
area_max:
  kind: numeric
  description: Upper bound on the deal area in hectares.
initiation_year_min:
  kind: numeric
  description: Earliest year the deal was initiated.
limit:
  kind: numeric
  description: Maximum number of records to return.
country_id:
  kind: identifier
  description: Numeric id of the target country.
region_id:
  kind: identifier
  description: Numeric id of the target world region.
negotiation_status:
  kind: enumerated
  description: Stage the deal negotiation has reached.
  values: [CONTRACT_SIGNED, CONTRACT_CANCELED]
crops:
  kind: enumerated
  description: Main crop cultivated on the acquired land.
  values: [RICE, COTTON]
transnational:
  kind: enumerated
  description: Whether the investor and target country differ.
  values: ["true", "false"]
forest_concession:
  kind: enumerated
  description: Whether the deal is a forest concession.
  values: ["true", "false"]
nature_of_deal:
  kind: enumerated
  description: Legal form of the land transfer.
  values: [LEASE, CONCESSION]
intention_of_investment:
  kind: enumerated
  description: Declared purpose of the acquisition.
  values: [MINING, TOURISM]
"""

SCHEMA = """\
schema: |
  GraphQL root field deals(...) returns land deals; records carry an
  integer id. Filters are passed as arguments, lists for several values.
rules: |
  - Reply with a single anonymous query operation and nothing else.
  - Always select at least one field.
"""

CONFIG = """\
llm:
  cassette: llm.jsonl
  models: [Codestral-22B]
api:
  cassette: api.jsonl
embedding:
  mode: hash
  dimension: 64
rag:
  k: 2
  retrieve_from: dev
run:
  mode: cassette
  seed: 7
  test_fraction: 0.8
  strategies: [agentic]
  dialects: [GRAPHQL]
paths:
  corpus: corpus.jsonl
  vocabulary: vocabulary.yaml
  schema_context: schema.yaml
  out_dir: runs
"""


def deals(ids):
    return {"data": {"deals": [{"id": n} for n in ids]}}


# One design per held-out sample, applied in file order. `records` holds
# the API exchanges the sample needs: (query text, status, body).
TEST_DESIGNS = [
    {
        # Exact match; the generated query only reorders arguments.
        "question": "Which deals in Cambodia are bigger than 1000 hectares?",
        "ref": "query { deals(area_min: 1000, country_id: 116) { id } }",
        "agent1": "[area_min: 1000]\n[country_id: 116]",
        "agent2": "query { deals(country_id: 116, area_min: 1000) { id } }",
        "records": [("query { deals(area_min: 1000, country_id: 116) { id } }", 200, deals([1, 2]))],
    },
    {
        # Exact match with a single enumerated filter.
        "question": "List the deals with signed contracts.",
        "ref": "query { deals(negotiation_status: CONTRACT_SIGNED) { id } }",
        "agent1": "[negotiation_status: contract signed]",
        "agent2": "query { deals(negotiation_status: CONTRACT_SIGNED) { id } }",
        "records": [("query { deals(negotiation_status: CONTRACT_SIGNED) { id } }", 200, deals([3]))],
    },
    {
        # Right attributes, one wrong value.
        "question": "Deals in country 4 over 2000 hectares.",
        "ref": "query { deals(area_min: 2000, country_id: 4) { id } }",
        "agent1": "[area_min: 3000]\n[country_id: 4]",
        "agent2": "query { deals(area_min: 3000, country_id: 4) { id } }",
        "records": [
            ("query { deals(area_min: 2000, country_id: 4) { id } }", 200, deals([1, 2])),
            ("query { deals(area_min: 3000, country_id: 4) { id } }", 200, deals([1, 2, 3, 4])),
        ],
    },
    {
        # One reference attribute missing from the generation.
        "question": "Rice deals larger than 500 hectares.",
        "ref": "query { deals(crops: RICE, area_min: 500) { id } }",
        "agent1": "[crops: rice]",
        "agent2": "query { deals(crops: RICE) { id } }",
        "records": [
            ("query { deals(crops: RICE, area_min: 500) { id } }", 200, deals([7])),
            ("query { deals(crops: RICE) { id } }", 200, deals([7, 8, 9, 10])),
        ],
    },
    {
        # One spurious attribute on top of a correct pair.
        "question": "Transnational deals in Indonesia.",
        "ref": "query { deals(country_id: 360, transnational: true) { id } }",
        "agent1": "[country_id: 360]\n[transnational: true]\n[limit: 10]",
        "agent2": "query { deals(country_id: 360, transnational: true, limit: 10) { id } }",
        "records": [
            ("query { deals(country_id: 360, transnational: true) { id } }", 200, deals([1, 2, 3, 4, 5])),
            ("query { deals(country_id: 360, transnational: true, limit: 10) { id } }", 200, deals([1, 2, 3, 4])),
        ],
    },
    {
        # Wrong attribute entirely; entity extraction returned prose.
        "question": "Deals in world region 2.",
        "ref": "query { deals(region_id: 2) { id } }",
        "agent1": "The question seems to mention a region but I cannot pin it down.",
        "agent2": "query { deals(country_id: 2) { id } }",
        "records": [
            ("query { deals(region_id: 2) { id } }", 200, deals([1, 2])),
            ("query { deals(country_id: 2) { id } }", 200, deals([3, 4])),
        ],
    },
    {
        # Filterless on both sides.
        "question": "Show every deal.",
        "ref": "query { deals { id } }",
        "agent1": "",
        "agent2": "query { deals { id } }",
        "records": [("query { deals { id } }", 200, deals([1, 2, 3]))],
    },
    {
        # The API accepts a fragment spread the local grammar rejects.
        "question": "Deals smaller than 50 hectares.",
        "ref": "query { deals(area_max: 50) { id } }",
        "agent1": "[area_max: 50]",
        "agent2": "query { deals(area_max: 50) { ...dealFields } }",
        "records": [
            ("query { deals(area_max: 50) { id } }", 200, deals([1, 2, 3])),
            ("query { deals(area_max: 50) { ...dealFields } }", 200, deals([1])),
        ],
    },
    {
        # Refusal: no query in the final answer.
        "question": "Which deals are leases?",
        "ref": "query { deals(nature_of_deal: LEASE) { id } }",
        "agent1": "[nature_of_deal: lease]",
        "agent2": "I am sorry, I cannot produce a query for that question.",
        "records": [],
    },
    {
        # Malformed generation; the API answers 400.
        "question": "Deals initiated after 2010.",
        "ref": "query { deals(initiation_year_min: 2010) { id } }",
        "agent1": "[initiation_year_min: 2010]",
        "agent2": "query { deals(area_min: ) { id } }",
        "records": [("query { deals(area_min: ) { id } }", 400, "Bad Request")],
    },
    {
        # 200 with a GraphQL error body.
        "question": "Mining deals.",
        "ref": "query { deals(intention_of_investment: MINING) { id } }",
        "agent1": "[intention_of_investment: tourism]",
        "agent2": "query { deals(intention_of_investment: TOURISM) { id } }",
        "records": [
            (
                "query { deals(intention_of_investment: TOURISM) { id } }",
                200,
                {"errors": [{"message": "internal failure"}], "data": None},
            )
        ],
    },
    {
        # Server error.
        "question": "Forest concession deals.",
        "ref": "query { deals(forest_concession: true) { id } }",
        "agent1": "[forest_concession: true]",
        "agent2": "query { deals(area_max: 100) { id } }",
        "records": [("query { deals(area_max: 100) { id } }", 500, "Internal Server Error")],
    },
]

# Retrieval pool only; never generated or executed.
DEV_DESIGNS = [
    {"question": "Deals in Cambodia?", "ref": "query { deals(country_id: 116) { id } }"},
    {"question": "Canceled contracts?", "ref": "query { deals(negotiation_status: CONTRACT_CANCELED) { id } }"},
    {"question": "Deals over 750 hectares?", "ref": "query { deals(area_min: 750) { id } }"},
]

# Hand-computed from the designs above (see the per-design comments):
# 8 of 12 samples execute validly; the seven locally parseable valid
# samples sum to tp=8 fp=2 fn=2 tp_values=7; the mean result overlap is
# (1 + 1 + 0.5 + 0.25 + 0.8 + 0 + 1 + 1/3 + 0 + 0 + 0 + 0) / 12.
EXPECTED = {
    "strategy": "agentic",
    "model": MODEL,
    "dialect": "GRAPHQL",
    "n_samples": 12,
    "n_valid": 8,
    "n_unscored": 0,
    "n_parser_gap": 1,
    "micro_confusion": {"tp": 8, "fp": 2, "fn": 2, "tp_values": 7},
    "fractions": {
        "valid_query": 0.6666666666666666,
        "precision": 0.8,
        "recall": 0.8,
        "accuracy": 0.6666666666666666,
        "f1": 0.8,
        "value_score": 0.7,
        "valid_result": 0.4069444444444444,
    },
    "formatted": {
        "valid_query_0dp": "67%",
        "precision_2dp": "80.00%",
        "recall_2dp": "80.00%",
        "accuracy_2dp": "66.67%",
        "f1_2dp": "80.00%",
        "value_score_2dp": "70.00%",
        "valid_result_2dp": "40.69%",
        "valid_result_0dp": "41%",
    },
    "per_sample_jaccard": [1.0, 1.0, 0.5, 0.25, 0.8, 0.0, 1.0, 1 / 3, None, None, None, None],
}


class PlannedBackend:
    """Answers scripted texts per question and records every exchange."""

    kind = "scripted"

    def __init__(self, queues, store):
        self.queues = {q: list(texts) for q, texts in queues.items()}
        self.store = store

    def complete(self, request):
        question = request.messages[-1].content.split("\n\n", 1)[0]
        text = self.queues[question].pop(0)
        self.store.append(request, text)
        return ChatResponse(text=text, model=request.model, latency_ms=0.0, backend="scripted")

    def drained(self):
        return all(not q for q in self.queues.values())


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    ids = [f"g{n:02d}" for n in range(1, 16)]

    # The split permutes indices by seed alone, so a provisional pass
    # tells us which file positions are held out.
    provisional = [
        CorpusEntry(id=i, question=f"placeholder {i}?", graphql_query="query { deals { id } }")
        for i in ids
    ]
    dev, test = split_corpus(provisional, TEST_FRACTION, SEED)
    dev_ids = [e.id for e in dev]
    test_ids = [e.id for e in test]
    assert len(test_ids) == len(TEST_DESIGNS) and len(dev_ids) == len(DEV_DESIGNS)

    content = dict(zip(test_ids, TEST_DESIGNS))
    content.update(zip(dev_ids, DEV_DESIGNS))
    entries = [
        CorpusEntry(id=i, question=content[i]["question"], graphql_query=content[i]["ref"])
        for i in ids
    ]
    save_corpus(entries, OUT_DIR / "corpus.jsonl")
    (OUT_DIR / "vocabulary.yaml").write_text(VOCAB)
    (OUT_DIR / "schema.yaml").write_text(SCHEMA)
    (OUT_DIR / "config.yaml").write_text(CONFIG)
    (OUT_DIR / "llm.jsonl").write_text("")
    (OUT_DIR / "api.jsonl").write_text("")

    config = load_config(OUT_DIR / "config.yaml")
    runtime = build_runtime(config)
    assert [e.id for e in runtime.test] == test_ids, "split drifted from the provisional pass"

    store = CassetteStore(Path(config.llm.cassette))
    for entry_id in test_ids:
        design = content[entry_id]
        backend = PlannedBackend({design["question"]: [design["agent1"], design["agent2"]]}, store)
        deps = replace(runtime.generation_deps(), backend=backend)
        generate(design["question"], "agentic", Dialect.GRAPHQL, MODEL, deps)
        assert backend.drained(), f"unused planned responses for {entry_id}"

    cassette = ApiCassette(Path(config.api.cassette))
    seen: dict[str, tuple] = {}
    for entry_id in test_ids:
        for text, status, body in content[entry_id]["records"]:
            key = cassette_key(text, Dialect.GRAPHQL)
            body_text = body if isinstance(body, str) else json.dumps(body)
            if key in seen:
                assert seen[key] == (status, body_text), f"cassette key collision: {key}"
                continue
            seen[key] = (status, body_text)
            cassette.append(key, Dialect.GRAPHQL, status, body_text)

    (OUT_DIR / "expected_report.json").write_text(json.dumps(EXPECTED, indent=2) + "\n")
    print(
        f"wrote fixture: {len(entries)} entries, {len(store)} llm records, "
        f"{len(cassette)} api records -> {OUT_DIR}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
