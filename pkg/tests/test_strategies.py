"""Strategy construction and generation-flow tests.

The chat backend here is an in-memory script: no cassettes, no network.
"""

import pytest

from nl2api.corpus import (
    AttributeSpec,
    AttributeVocabulary,
    CorpusEntry,
    SchemaContext,
)
from nl2api.gateway import CassetteMiss, ChatResponse
from nl2api.query_model import Dialect
from nl2api.strategies import (
    EntityBinding,
    GenerationDeps,
    MissingExamples,
    PromptBundle,
    TemplateSet,
    UnknownStrategy,
    build_prompt_engineering,
    build_rag,
    filter_bindings,
    generate,
    parse_entity_output,
    render_vocabulary,
    resolve_entity_values,
)
from nl2api.vectors import HashEmbeddingBackend, build_index

GQL = Dialect.GRAPHQL
REST = Dialect.REST

VOCAB = AttributeVocabulary(
    {
        "negotiation_status": AttributeSpec(
            kind="enumerated",
            description="Stage of the negotiation.",
            allowed_values=frozenset({"CONTRACT_SIGNED", "CONTRACT_CANCELED"}),
        ),
        "area_min": AttributeSpec(kind="numeric", description="Minimum area in hectares."),
        "country_id": AttributeSpec(kind="identifier", description="Numeric country id."),
    }
)

SCHEMA = SchemaContext(
    schema_text="deals(area_min, country_id, negotiation_status) -> id",
    api_rules="One query only.",
    static_examples={
        "REST": (("Deals over 500 ha?", "/api/deals/?area_min=500"),),
        "GRAPHQL": (
            ("Deals over 500 ha?", "query { deals(area_min: 500) { id } }"),
            ("Canceled deals?", "query { deals(negotiation_status: CONTRACT_CANCELED) { id } }"),
        ),
    },
)

POOL_ENTRIES = [
    CorpusEntry(
        id=f"p{i}",
        question=q,
        rest_query=f"/api/deals/?area_min={i}",
        graphql_query=f"query {{ deals(area_min: {i}) {{ id }} }}",
    )
    for i, q in enumerate(
        ["Deals over one hectare?", "Deals in Kenya?", "Canceled deals in 2020?"]
    )
]
POOL = {e.id: e for e in POOL_ENTRIES}
EMBEDDING = HashEmbeddingBackend(dimension=32)
INDEX = build_index([(e.id, e.question) for e in POOL_ENTRIES], EMBEDDING)

TEMPLATES = TemplateSet.load()


class ScriptedChat:
    """Returns queued texts in order and records the requests."""

    kind = "scripted"

    def __init__(self, *texts):
        self.queue = list(texts)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        if not self.queue:
            raise CassetteMiss("0" * 16)
        item = self.queue.pop(0)
        if isinstance(item, Exception):
            raise item
        return ChatResponse(text=item, model=request.model, latency_ms=0.0, backend="scripted")


def deps(backend, **kwargs):
    return GenerationDeps(
        backend=backend,
        templates=TEMPLATES,
        schema_context=SCHEMA,
        vocabulary=VOCAB,
        index=kwargs.pop("index", INDEX),
        pool=kwargs.pop("pool", POOL),
        embedding_backend=kwargs.pop("embedding_backend", EMBEDDING),
        **kwargs,
    )


def test_template_placeholders_render():
    bundle = build_prompt_engineering("Deals over 1000 ha?", GQL, SCHEMA, VOCAB, TEMPLATES)
    assert "GraphQL" in bundle.instruction
    assert "### API schema" in bundle.context
    assert "deals(area_min" in bundle.context
    assert "CONTRACT_CANCELED" in bundle.context  # full value listing
    assert "Q: Deals over 500 ha?" in bundle.context
    system, user = bundle.messages()
    assert system.role == "system"
    assert user.content.startswith("Deals over 1000 ha?")
    assert user.content.index("Deals over 1000 ha?") < user.content.index("### API schema")


def test_prompt_engineering_caps_examples_and_requires_some():
    pairs = tuple((f"q{i}", f"/api/deals/?area_min={i}") for i in range(9))
    schema = SchemaContext("s", "r", {"REST": pairs})
    bundle = build_prompt_engineering("q?", REST, schema, VOCAB, TEMPLATES)
    assert bundle.context.count("REST query:") == 4
    with pytest.raises(MissingExamples):
        build_prompt_engineering("q?", GQL, schema, VOCAB, TEMPLATES)


def test_prompt_engineering_is_deterministic():
    a = build_prompt_engineering("Same question?", REST, SCHEMA, VOCAB, TEMPLATES)
    b = build_prompt_engineering("Same question?", REST, SCHEMA, VOCAB, TEMPLATES)
    assert a == b


def test_rag_uses_retrieved_examples_in_similarity_order():
    bundle, retrieved = build_rag(
        "Deals in Kenya?", GQL, SCHEMA, VOCAB, TEMPLATES, INDEX, POOL, EMBEDDING, k=2
    )
    assert len(retrieved) == 2
    assert retrieved[0] == "p1"  # exact question match ranks first
    first = POOL[retrieved[0]].question
    second = POOL[retrieved[1]].question
    assert bundle.context.index(first) < bundle.context.index(second)
    # Static examples are replaced, not appended.
    assert "Deals over 500 ha?" not in bundle.context


def test_rag_skips_entries_missing_the_dialect():
    pool = dict(POOL)
    pool["p1"] = CorpusEntry(id="p1", question=POOL["p1"].question, rest_query="/api/deals/")
    _, retrieved = build_rag(
        "Deals in Kenya?", GQL, SCHEMA, VOCAB, TEMPLATES, INDEX, pool, EMBEDDING, k=3
    )
    assert "p1" not in retrieved
    assert len(retrieved) == 2


def test_parse_entity_output_bracket_lines():
    raw = "[area_min: 1000]\n[negotiation_status: canceled]\nnoise line\n"
    bindings, notes = parse_entity_output(raw)
    assert bindings == (
        EntityBinding("area_min", "1000"),
        EntityBinding("negotiation_status", "canceled"),
    )
    assert notes == ()


def test_parse_entity_output_json_fallbacks():
    bindings, _ = parse_entity_output('{"area_min": 1000, "country": "Kenya"}')
    assert EntityBinding("area_min", "1000") in bindings
    bindings, _ = parse_entity_output(
        '[{"entity": "area_min", "value": "1000"}, {"entity": "x", "value": "y"}]'
    )
    assert bindings[0] == EntityBinding("area_min", "1000")


def test_parse_entity_output_garbage_warns_but_does_not_fail():
    bindings, notes = parse_entity_output("The question asks about large deals.")
    assert bindings == ()
    assert len(notes) == 1
    bindings, notes = parse_entity_output("")
    assert bindings == () and notes == ()


def test_filter_bindings_drops_unknown_entities():
    kept, notes = filter_bindings(
        (EntityBinding("area_min", "1"), EntityBinding("weather", "sunny")), VOCAB
    )
    assert kept == (EntityBinding("area_min", "1"),)
    assert len(notes) == 1 and "weather" in notes[0]


def test_resolve_entity_values_expands_enumerations_only():
    fragment = resolve_entity_values(
        (
            EntityBinding("negotiation_status", "canceled"),
            EntityBinding("area_min", "1000"),
            EntityBinding("negotiation_status", "dup"),
        ),
        VOCAB,
    )
    assert "CONTRACT_CANCELED" in fragment
    assert "CONTRACT_SIGNED" in fragment
    assert "Minimum area in hectares." in fragment
    assert fragment.count("negotiation_status") == 1  # deduped


def test_render_vocabulary_with_and_without_values():
    with_values = render_vocabulary(VOCAB, include_values=True)
    without = render_vocabulary(VOCAB, include_values=False)
    assert "CONTRACT_SIGNED" in with_values
    assert "CONTRACT_SIGNED" not in without
    assert "area_min" in without


def test_generate_prompt_engineering_flow():
    backend = ScriptedChat("```\nquery { deals(area_min: 1000) { id } }\n```")
    trace = generate("Deals over 1000 ha?", "prompt_engineering", GQL, "Codestral-22B", deps(backend))
    assert trace.extracted_query == "query { deals(area_min: 1000) { id } }"
    assert trace.strategy == "prompt_engineering"
    assert len(trace.prompts) == 1
    assert len(trace.raw_outputs) == 1
    assert trace.bindings is None
    assert backend.requests[0].model == "Codestral-22B"


def test_generate_rag_records_retrieved_ids():
    backend = ScriptedChat("/api/deals/?area_min=1")
    trace = generate("Deals over one hectare?", "rag", REST, "m", deps(backend))
    assert trace.retrieved_ids is not None and trace.retrieved_ids[0] == "p0"
    assert trace.extracted_query == "/api/deals/?area_min=1"


def test_generate_agentic_two_step_flow():
    backend = ScriptedChat(
        "[area_min: 1000]\n[negotiation_status: canceled]",
        "query { deals(area_min: 1000, negotiation_status: CONTRACT_CANCELED) { id } }",
    )
    trace = generate("Canceled deals over 1000 ha?", "agentic", GQL, "m", deps(backend))
    assert trace.extracted_query.startswith("query { deals(area_min: 1000")
    assert trace.bindings == (
        EntityBinding("area_min", "1000"),
        EntityBinding("negotiation_status", "canceled"),
    )
    assert len(trace.prompts) == 2
    assert len(trace.raw_outputs) == 2

    entity_prompt, generation_prompt = trace.prompts
    # Agent 1 sees the catalog without values.
    assert "CONTRACT_CANCELED" not in entity_prompt.context
    # Agent 2 sees resolved values for bound attributes only; the
    # unbound country_id attribute's vocabulary line stays out (its
    # mention in the schema text is fine).
    assert "CONTRACT_CANCELED" in generation_prompt.context
    assert "Numeric country id." not in generation_prompt.context
    assert "[area_min: 1000]" in generation_prompt.context


def test_generate_agentic_garbage_extraction_continues():
    backend = ScriptedChat(
        "I think this question concerns large deals.",
        "query { deals { id } }",
    )
    trace = generate("Any deals?", "agentic", GQL, "m", deps(backend))
    assert trace.extracted_query == "query { deals { id } }"
    assert trace.bindings == ()
    assert any("no parseable bindings" in n for n in trace.notes)
    assert "No constraints were extracted" in trace.prompts[1].context


def test_generate_agentic_include_bindings_flag():
    backend = ScriptedChat("[area_min: 1000]", "query { deals(area_min: 1000) { id } }")
    trace = generate(
        "Big deals?", "agentic", GQL, "m", deps(backend, include_bindings=False)
    )
    assert "[area_min: 1000]" not in trace.prompts[1].context
    assert "Minimum area in hectares." in trace.prompts[1].context


def test_generate_refusal_yields_no_query_with_note():
    backend = ScriptedChat("I cannot help with that request.")
    trace = generate("Deals?", "prompt_engineering", GQL, "m", deps(backend))
    assert trace.extracted_query is None
    assert any("no GRAPHQL query" in n for n in trace.notes)
    assert len(trace.raw_outputs) == 1


def test_generate_gateway_failure_yields_note_not_exception():
    backend = ScriptedChat()  # empty queue -> CassetteMiss
    trace = generate("Deals?", "prompt_engineering", GQL, "m", deps(backend))
    assert trace.extracted_query is None
    assert any("completion failed" in n for n in trace.notes)

    backend = ScriptedChat()  # agent 1 already fails
    trace = generate("Deals?", "agentic", GQL, "m", deps(backend))
    assert trace.extracted_query is None
    assert any("entity extraction failed" in n for n in trace.notes)


def test_generate_validates_inputs():
    backend = ScriptedChat()
    with pytest.raises(UnknownStrategy):
        generate("q", "zero_shot", GQL, "m", deps(backend))
    with pytest.raises(ValueError):
        generate("  ", "rag", GQL, "m", deps(backend))
    bare = GenerationDeps(
        backend=backend, templates=TEMPLATES, schema_context=SCHEMA, vocabulary=VOCAB
    )
    with pytest.raises(Exception) as err:
        generate("q", "rag", GQL, "m", bare)
    assert "index" in str(err.value)


def test_trace_digest_is_stable_and_content_sensitive():
    backend = ScriptedChat("/api/deals/?area_min=1")
    trace = generate("Deals over one hectare?", "rag", REST, "m", deps(backend))
    backend2 = ScriptedChat("/api/deals/?area_min=1")
    trace2 = generate("Deals over one hectare?", "rag", REST, "m", deps(backend2))
    assert trace.digest() == trace2.digest()
    backend3 = ScriptedChat("/api/deals/?area_min=2")
    trace3 = generate("Deals over one hectare?", "rag", REST, "m", deps(backend3))
    assert trace3.digest() != trace.digest()


def test_prompt_bundle_sections_are_exposed():
    bundle = PromptBundle(instruction="i", question="q", context="c")
    system, user = bundle.messages()
    assert (system.content, user.content) == ("i", "q\n\nc")
