"""Package-level acceptance checks.

These pin the contracts the rest of the test suite assumes piecemeal:
metric arithmetic against independently coded oracles, parser round
trips over the shipped corpus, exact nearest-neighbor retrieval against
a brute-force reference, and a byte-deterministic benchmark replay that
must reproduce the frozen numbers in tests/data/e2e/expected_report.json.
Tolerance for float comparisons is 1e-12 throughout; counts match
exactly.
"""

import json
import os
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from nl2api.cli import main
from nl2api.corpus import load_corpus
from nl2api.evaluator import (
    EvalOutcome,
    aggregate,
    attribute_confusion,
    format_percent,
    jaccard,
    sample_scores,
)
from nl2api.query_model import Dialect, Filter, ValueKind, parse, serialize
from nl2api.vectors import HashEmbeddingBackend, embed, load_index, top_k

TOL = 1e-12
REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "tests" / "data"
E2E = DATA / "e2e"


# --- metric oracles -------------------------------------------------------

ATTRIBUTES = [
    "area_min",
    "area_max",
    "country_id",
    "region_id",
    "negotiation_status",
    "crops",
    "limit",
    "transnational",
    "operating_company.investor_id",
]

RAW_VALUES = [
    "1000",
    "007",
    "+12",
    "2500.50",
    "0.5",
    "-0",
    "RICE",
    "rice",
    "CONTRACT_SIGNED",
    "true",
    "false",
    "Sierra Leone",
    "west africa",
    "2015",
]


def random_filters(rng: random.Random) -> frozenset[Filter]:
    chosen = rng.sample(ATTRIBUTES, rng.randint(0, 6))
    filters = []
    for attribute in chosen:
        raws = rng.sample(RAW_VALUES, rng.randint(1, 3))
        filters.append(Filter.of(attribute, *raws))
    return frozenset(filters)


def mutate_filters(reference: frozenset[Filter], rng: random.Random) -> frozenset[Filter]:
    """A generated-side filter set correlated with the reference."""
    out = []
    for f in reference:
        roll = rng.random()
        if roll < 0.4:
            out.append(f)
        elif roll < 0.7:
            raws = rng.sample(RAW_VALUES, rng.randint(1, 3))
            out.append(Filter.of(f.attribute, *raws))
        # else: dropped
    for attribute in rng.sample(ATTRIBUTES, rng.randint(0, 2)):
        if all(f.attribute != attribute for f in out):
            raws = rng.sample(RAW_VALUES, rng.randint(1, 2))
            out.append(Filter.of(attribute, *raws))
    return frozenset(out)


def oracle_confusion(reference, generated):
    """Same definition counted one attribute at a time."""
    ref = {f.attribute: frozenset(v.comparison_key for v in f.values) for f in reference}
    gen = {f.attribute: frozenset(v.comparison_key for v in f.values) for f in generated}
    tp = fp = fn = tp_values = 0
    for attribute in sorted(set(ref) | set(gen)):
        if attribute in ref and attribute in gen:
            tp += 1
            if ref[attribute] == gen[attribute]:
                tp_values += 1
        elif attribute in gen:
            fp += 1
        else:
            fn += 1
    return tp, fp, fn, tp_values


def oracle_scores(tp, fp, fn, tp_values):
    """Exact-rational rendition of the score definitions."""
    both_empty = tp + fp + fn == 0

    def ratio(num, den):
        if den == 0:
            return Fraction(1) if both_empty else Fraction(0)
        return Fraction(num, den)

    precision = ratio(tp, tp + fp)
    recall = ratio(tp, tp + fn)
    accuracy = ratio(tp, tp + fp + fn)
    if precision + recall == 0:
        f1 = Fraction(1) if both_empty else Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)
    value_score = ratio(tp_values, tp + fn)
    return precision, recall, accuracy, f1, value_score


def test_confusion_and_scores_match_oracle_on_1000_random_pairs():
    rng = random.Random(20240817)
    started = time.perf_counter()
    for _ in range(1000):
        reference = random_filters(rng)
        generated = mutate_filters(reference, rng)

        confusion = attribute_confusion(reference, generated)
        tp, fp, fn, tp_values = oracle_confusion(reference, generated)
        assert (confusion.tp, confusion.fp, confusion.fn, confusion.tp_values) == (
            tp,
            fp,
            fn,
            tp_values,
        )

        scores = sample_scores(confusion)
        for got, want in zip(
            (scores.precision, scores.recall, scores.accuracy, scores.f1, scores.value_score),
            oracle_scores(tp, fp, fn, tp_values),
        ):
            assert abs(got - float(want)) <= TOL
    assert time.perf_counter() - started < 5.0


def test_jaccard_matches_membership_counting_on_1000_random_pairs():
    rng = random.Random(424242)
    for _ in range(1000):
        a = {rng.randint(0, 40) for _ in range(rng.randint(0, 12))}
        b = {rng.randint(0, 40) for _ in range(rng.randint(0, 12))}

        in_both = in_either = 0
        for x in range(41):
            if x in a and x in b:
                in_both += 1
            if x in a or x in b:
                in_either += 1
        expected = 1.0 if in_either == 0 else in_both / in_either
        assert jaccard(a, b) == expected


def test_jaccard_properties():
    rng = random.Random(7)
    assert jaccard(set(), set()) == 1.0
    assert jaccard({1, 2}, set()) == 0.0
    assert jaccard({1, 2}, {3, 4}) == 0.0
    for _ in range(200):
        a = {rng.randint(0, 30) for _ in range(rng.randint(1, 10))}
        b = {rng.randint(0, 30) for _ in range(rng.randint(1, 10))}
        assert jaccard(a, a) == 1.0
        assert jaccard(a, b) == jaccard(b, a)
        assert 0.0 <= jaccard(a, b) <= 1.0


# --- parser round trips over the shipped corpus ---------------------------


def shipped_corpus():
    return load_corpus(REPO / "data" / "corpus.jsonl")


def test_shipped_corpus_is_large_enough():
    entries = shipped_corpus()
    assert sum(1 for e in entries if e.rest_query) >= 30
    assert sum(1 for e in entries if e.graphql_query) >= 30


def test_round_trip_is_a_fixed_point_for_every_shipped_query():
    for entry in shipped_corpus():
        for dialect in Dialect:
            text = entry.query_for(dialect)
            if text is None:
                continue
            query = parse(text, dialect)
            canonical = serialize(query)
            again = parse(canonical, dialect)
            assert again == query, entry.id
            assert serialize(again) == canonical, entry.id


def test_rest_parameter_order_never_matters():
    rng = random.Random(11)
    for entry in shipped_corpus():
        if not entry.rest_query or "?" not in entry.rest_query:
            continue
        path, _, qs = entry.rest_query.partition("?")
        pairs = qs.split("&")
        baseline = parse(entry.rest_query, Dialect.REST)
        for _ in range(3):
            rng.shuffle(pairs)
            assert parse(path + "?" + "&".join(pairs), Dialect.REST) == baseline, entry.id


def _graphql_value_literal(value) -> str:
    if value.kind is ValueKind.TEXT:
        return json.dumps(value.canonical)
    return value.canonical


def _reverse_order_graphql(query) -> str:
    """Re-render a parsed query with arguments, selection and list items
    in reverse-sorted order, every value as a one-or-more element list."""
    arg_tree: dict = {}
    for f in query.filters:
        node = arg_tree
        *parents, leaf = f.attribute.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = f.values

    def render_args(node) -> str:
        parts = []
        for key in sorted(node, reverse=True):
            sub = node[key]
            if isinstance(sub, dict):
                parts.append(f"{key}: {{{render_args(sub)}}}")
            else:
                items = sorted((_graphql_value_literal(v) for v in sub), reverse=True)
                parts.append(f"{key}: [{', '.join(items)}]")
        return ", ".join(parts)

    sel_tree: dict = {}
    for path in query.selection:
        node = sel_tree
        for part in path.split("."):
            node = node.setdefault(part, {})

    def render_selection(node) -> str:
        parts = []
        for key in sorted(node, reverse=True):
            sub = node[key]
            parts.append(f"{key} {{ {render_selection(sub)} }}" if sub else key)
        return " ".join(parts)

    args = render_args(arg_tree)
    head = f"{query.resource}({args})" if args else query.resource
    return f"query {{ {head} {{ {render_selection(sel_tree)} }} }}"


def test_graphql_argument_order_never_matters():
    for entry in shipped_corpus():
        if not entry.graphql_query:
            continue
        baseline = parse(entry.graphql_query, Dialect.GRAPHQL)
        variant = _reverse_order_graphql(baseline)
        assert parse(variant, Dialect.GRAPHQL) == baseline, entry.id


# --- retrieval against a brute-force reference ----------------------------


@pytest.fixture(scope="module")
def fixture_index():
    index = load_index(DATA / "fixture_index_60.bin")
    texts = json.loads((DATA / "fixture_index_60_texts.json").read_text())
    backend = HashEmbeddingBackend(dimension=index.matrix.shape[1])
    assert backend.backend_id == index.backend_id
    return index, texts, backend


def brute_force_top_k(index, query_vector, k):
    matrix = index.matrix.astype(np.float64)
    q = query_vector.values.astype(np.float64)
    sims = (matrix @ q) / (np.linalg.norm(matrix, axis=1) * np.linalg.norm(q))
    order = sorted(range(len(index.entry_ids)), key=lambda i: (-sims[i], index.entry_ids[i]))
    return [(index.entry_ids[i], float(sims[i])) for i in order[:k]]


def test_retrieval_matches_brute_force_for_100_seeded_probes(fixture_index):
    index, _, backend = fixture_index
    rng = random.Random(60606)
    for i in range(100):
        probe = f"Probe {i}: anything about land deal number {i * 13 % 97}?"
        k = rng.randint(1, 10)
        vector = embed(probe, backend)
        got = top_k(index, vector, k)
        want = brute_force_top_k(index, vector, k)
        assert [entry_id for entry_id, _ in got] == [entry_id for entry_id, _ in want]
        for (_, sim_got), (_, sim_want) in zip(got, want):
            assert abs(sim_got - sim_want) <= TOL


def test_retrieval_self_hit(fixture_index):
    index, texts, backend = fixture_index
    duplicated = {"q17", "q41"}  # identical text, identical vector
    for entry_id, text in texts.items():
        results = top_k(index, embed(text, backend), 2)
        top_id, top_sim = results[0]
        assert top_sim >= 0.999
        if entry_id in duplicated:
            assert top_id == min(duplicated)
        else:
            assert top_id == entry_id


def test_retrieval_ties_resolve_by_entry_id(fixture_index):
    index, texts, backend = fixture_index
    results = top_k(index, embed(texts["q17"], backend), 2)
    assert [entry_id for entry_id, _ in results] == ["q17", "q41"]
    assert results[0][1] == results[1][1]


# --- full benchmark replay against frozen numbers -------------------------


def run_eval(out_dir: Path) -> list[EvalOutcome]:
    code = main(["--config", str(E2E / "config.yaml"), "eval", "--out-dir", str(out_dir)])
    assert code == 0
    lines = (out_dir / "outcomes.jsonl").read_text().splitlines()
    return [EvalOutcome.from_record(json.loads(line)) for line in lines]


def expected():
    return json.loads((E2E / "expected_report.json").read_text())


def test_replayed_benchmark_reproduces_frozen_report(tmp_path):
    outcomes = run_eval(tmp_path / "run")
    want = expected()

    assert len(outcomes) == want["n_samples"]
    assert sum(o.syntax_valid for o in outcomes) == want["n_valid"]
    assert sum(o.unscored is not None for o in outcomes) == want["n_unscored"]
    assert sum(o.parser_gap for o in outcomes) == want["n_parser_gap"]
    assert [o.result_jaccard for o in outcomes] == pytest.approx(
        want["per_sample_jaccard"], abs=TOL
    )

    rows = aggregate(outcomes)
    assert len(rows) == 1
    row = rows[0]
    assert (row.strategy, row.model, row.dialect.value) == (
        want["strategy"],
        want["model"],
        want["dialect"],
    )

    micro = want["micro_confusion"]
    total = [0, 0, 0, 0]
    for o in outcomes:
        if o.syntax_valid and o.confusion is not None:
            total[0] += o.confusion.tp
            total[1] += o.confusion.fp
            total[2] += o.confusion.fn
            total[3] += o.confusion.tp_values
    assert total == [micro["tp"], micro["fp"], micro["fn"], micro["tp_values"]]

    fractions = want["fractions"]
    for name, value in (
        ("valid_query", row.valid_query),
        ("precision", row.precision),
        ("recall", row.recall),
        ("accuracy", row.accuracy),
        ("f1", row.f1),
        ("value_score", row.value_score),
        ("valid_result", row.valid_result),
    ):
        assert abs(value / 100.0 - fractions[name]) <= TOL, name

    formatted = want["formatted"]
    assert format_percent(row.valid_query, 0) == formatted["valid_query_0dp"]
    assert format_percent(row.precision, 2) == formatted["precision_2dp"]
    assert format_percent(row.recall, 2) == formatted["recall_2dp"]
    assert format_percent(row.accuracy, 2) == formatted["accuracy_2dp"]
    assert format_percent(row.f1, 2) == formatted["f1_2dp"]
    assert format_percent(row.value_score, 2) == formatted["value_score_2dp"]
    assert format_percent(row.valid_result, 2) == formatted["valid_result_2dp"]
    assert format_percent(row.valid_result, 0) == formatted["valid_result_0dp"]

    report = (tmp_path / "run" / "report.md").read_text()
    assert "| Agentic | Codestral-22B | - | 67% |" in report
    assert "| Agentic | Codestral-22B | 80% | 80% | 67% | 80% | 70% |" in report
    assert "| Agentic | Codestral-22B | - | 41% |" in report


def test_replayed_benchmark_is_byte_identical_across_runs(tmp_path):
    run_eval(tmp_path / "a")
    run_eval(tmp_path / "b")
    for name in ("outcomes.jsonl", "report.md", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


# --- failure mapping -------------------------------------------------------


def test_failure_modes_map_to_the_right_outcomes(tmp_path):
    outcomes = run_eval(tmp_path / "run")

    gap = outcomes[7]
    assert gap.syntax_valid and gap.parser_gap and gap.confusion is None
    assert any(note.startswith("parser gap") for note in gap.notes)

    refusal = outcomes[8]
    assert not refusal.syntax_valid
    assert refusal.result_jaccard is None and refusal.confusion is None

    for position in (9, 10, 11):  # HTTP 400, error body, HTTP 500
        bad = outcomes[position]
        assert not bad.syntax_valid
        assert bad.result_jaccard is None
        assert bad.unscored is None


def test_ask_exit_codes_map_refusal_and_backend_failure(tmp_path, capsys):
    config = str(E2E / "config.yaml")
    assert main(["--config", config, "ask", "--strategy", "agentic", "--dialect", "GRAPHQL",
                 "Which deals are leases?"]) == 4
    capsys.readouterr()
    assert main(["--config", config, "ask", "--strategy", "agentic", "--dialect", "GRAPHQL",
                 "A question nobody recorded?"]) == 3
    capsys.readouterr()


def test_transport_level_failures_leave_samples_unscored(tmp_path):
    empty_api = tmp_path / "api.jsonl"
    empty_api.write_text("")
    config_path = tmp_path / "config.yaml"
    config_path.write_text(
        "llm:\n"
        f"  cassette: {E2E / 'llm.jsonl'}\n"
        "  models: [Codestral-22B]\n"
        "api:\n"
        f"  cassette: {empty_api}\n"
        "embedding:\n"
        "  mode: hash\n"
        "  dimension: 64\n"
        "rag:\n"
        "  k: 2\n"
        "run:\n"
        "  mode: cassette\n"
        "  seed: 7\n"
        "  test_fraction: 0.8\n"
        "  strategies: [agentic]\n"
        "  dialects: [GRAPHQL]\n"
        "paths:\n"
        f"  corpus: {E2E / 'corpus.jsonl'}\n"
        f"  vocabulary: {E2E / 'vocabulary.yaml'}\n"
        f"  schema_context: {E2E / 'schema.yaml'}\n"
        f"  out_dir: {tmp_path / 'runs'}\n"
    )
    code = main(["--config", str(config_path), "eval"])
    # The refusal never executes anything, so it alone stays scored.
    assert code == 0

    lines = (tmp_path / "runs" / "outcomes.jsonl").read_text().splitlines()
    records = [json.loads(line) for line in lines]
    assert sum(1 for r in records if r["unscored"]) == 11
    assert all("execution failed" in r["unscored"] for r in records if r["unscored"])

    # Unscored samples leave every denominator.
    outcomes = [EvalOutcome.from_record(r) for r in records]
    row = aggregate(outcomes)[0]
    assert row.n_samples == 1 and row.n_unscored == 11

    # Capped to the first sample, nothing gets scored at all.
    code = main(["--config", str(config_path), "eval", "--out-dir", str(tmp_path / "one"),
                 "--limit", "1"])
    assert code == 1


# --- optional live smoke ----------------------------------------------------


@pytest.mark.skipif(
    os.environ.get("NL2API_LIVE_SMOKE") != "1",
    reason="live smoke disabled; set NL2API_LIVE_SMOKE=1 and NL2API_LIVE_CONFIG",
)
def test_live_smoke():
    config_path = os.environ["NL2API_LIVE_CONFIG"]
    code = main(["--config", config_path, "--mode", "live", "ask", "Deals over 1000 hectares?"])
    assert code in (0, 4)
