"""The three question-to-query generation strategies.

* prompt_engineering: one completion with the full attribute reference
  and a fixed set of handwritten examples.
* rag: same prompt shape, but the examples are the k most similar
  corpus questions by embedding, in similarity order.
* agentic: two completions. Agent 1 extracts [attribute: value]
  constraints from the question against a values-free catalog; agent 2
  generates the query from retrieved examples plus resolved values for
  exactly the bound attributes, keeping its context minimal.

`generate` never raises for model behavior: refusals, gateway failures
and unextractable output come back as a trace with extracted_query=None
and a note, so a batch run keeps going. Setup problems (no examples for
the dialect, missing index) do raise.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from nl2api.corpus import AttributeVocabulary, CorpusEntry, SchemaContext
from nl2api.errors import Nl2ApiError
from nl2api.gateway import (
    ChatBackend,
    ChatMessage,
    ChatRequest,
    GatewayError,
    NoQueryFound,
    extract_query,
)
from nl2api.query_model import Dialect
from nl2api.vectors import EmbeddingBackend, VectorIndex, embed, top_k

STRATEGIES = ("prompt_engineering", "rag", "agentic")

DIALECT_NAMES = {Dialect.REST: "REST", Dialect.GRAPHQL: "GraphQL"}


class StrategyError(Nl2ApiError):
    pass


class UnknownStrategy(StrategyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGIES)}")


class MissingExamples(StrategyError):
    def __init__(self, dialect: Dialect):
        self.dialect = dialect
        super().__init__(f"no few-shot examples available for {dialect.value}")


@dataclass(frozen=True)
class TemplateSet:
    """The prompt scaffolding, loadable from package data or a directory."""

    instruction: str
    context: str
    entity_instruction: str
    entity_context: str

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateSet":
        def read(name: str) -> str:
            if directory is not None:
                return (Path(directory) / name).read_text(encoding="utf-8")
            return (resources.files("nl2api") / "templates" / name).read_text(encoding="utf-8")

        return cls(
            instruction=read("instruction.txt"),
            context=read("context.txt"),
            entity_instruction=read("entity_instruction.txt"),
            entity_context=read("entity_context.txt"),
        )


@dataclass(frozen=True)
class PromptBundle:
    """One prompt in its three fixed sections.

    Message order is instruction (system), then question followed by
    context (user): the question always precedes the reference material.
    """

    instruction: str
    question: str
    context: str

    def messages(self) -> tuple[ChatMessage, ...]:
        return (
            ChatMessage("system", self.instruction),
            ChatMessage("user", f"{self.question}\n\n{self.context}"),
        )


@dataclass(frozen=True)
class EntityBinding:
    entity: str
    value: str


@dataclass(frozen=True)
class GenerationTrace:
    """Complete record of one generation attempt."""

    question: str
    strategy: str
    model: str
    dialect: Dialect
    prompts: tuple[PromptBundle, ...]
    raw_outputs: tuple[str, ...]
    extracted_query: str | None
    bindings: tuple[EntityBinding, ...] | None = None
    retrieved_ids: tuple[str, ...] | None = None
    notes: tuple[str, ...] = ()

    def digest(self) -> str:
        """Stable content hash; latency never enters, so replays agree."""
        payload = {
            "question": self.question,
            "strategy": self.strategy,
            "model": self.model,
            "dialect": self.dialect.value,
            "prompts": [
                {"instruction": p.instruction, "question": p.question, "context": p.context}
                for p in self.prompts
            ],
            "raw_outputs": list(self.raw_outputs),
            "extracted_query": self.extracted_query,
            "bindings": None
            if self.bindings is None
            else [[b.entity, b.value] for b in self.bindings],
            "retrieved_ids": None if self.retrieved_ids is None else list(self.retrieved_ids),
            "notes": list(self.notes),
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()


def render_vocabulary(vocabulary: AttributeVocabulary, include_values: bool = True) -> str:
    """Attribute reference listing, alphabetical.

    With include_values the enumerated attributes list every allowed
    value; without, the catalog stays values-free (what agent 1 sees).
    """
    lines = []
    for name in vocabulary.names():
        spec = vocabulary.attributes[name]
        line = f"- {name} ({spec.kind})"
        if spec.description:
            line += f": {spec.description}"
        if include_values and spec.kind == "enumerated":
            line += f" Allowed values: {', '.join(sorted(spec.allowed_values))}."
        lines.append(line)
    return "\n".join(lines)


def render_examples(pairs: tuple[tuple[str, str], ...], dialect: Dialect) -> str:
    blocks = []
    for question, query in pairs:
        blocks.append(f"Q: {question}\n{DIALECT_NAMES[dialect]} query:\n{query}")
    return "\n\n".join(blocks)


def _bundle(
    question: str,
    dialect: Dialect,
    schema_context: SchemaContext,
    values_fragment: str,
    examples_text: str,
    templates: TemplateSet,
) -> PromptBundle:
    instruction = templates.instruction.format(dialect=DIALECT_NAMES[dialect]).strip()
    context = templates.context.format(
        schema=schema_context.schema_text.strip(),
        rules=schema_context.api_rules.strip(),
        values_fragment=values_fragment.strip(),
        examples=examples_text.strip(),
    ).strip()
    return PromptBundle(instruction=instruction, question=question.strip(), context=context)


def build_prompt_engineering(
    question: str,
    dialect: Dialect,
    schema_context: SchemaContext,
    vocabulary: AttributeVocabulary,
    templates: TemplateSet,
    max_examples: int = 4,
) -> PromptBundle:
    """Static prompt: full vocabulary plus handwritten examples."""
    pairs = schema_context.examples_for(dialect)[:max_examples]
    if not pairs:
        raise MissingExamples(dialect)
    return _bundle(
        question,
        dialect,
        schema_context,
        render_vocabulary(vocabulary, include_values=True),
        render_examples(pairs, dialect),
        templates,
    )


def retrieve_examples(
    question: str,
    dialect: Dialect,
    index: VectorIndex,
    pool: dict[str, CorpusEntry],
    backend: EmbeddingBackend,
    k: int,
) -> tuple[tuple[tuple[str, str], ...], tuple[str, ...]]:
    """Top-k similar corpus questions with their queries, similarity order.

    Returns (pairs, retrieved entry ids). Pool entries lacking a query
    in the requested dialect are skipped after retrieval.
    """
    hits = top_k(index, embed(question, backend), k)
    pairs = []
    kept_ids = []
    for entry_id, _score in hits:
        entry = pool.get(entry_id)
        if entry is None:
            raise StrategyError(f"index entry {entry_id!r} is not in the example pool")
        query = entry.query_for(dialect)
        if query is None:
            continue
        pairs.append((entry.question, query))
        kept_ids.append(entry_id)
    return tuple(pairs), tuple(kept_ids)


def build_rag(
    question: str,
    dialect: Dialect,
    schema_context: SchemaContext,
    vocabulary: AttributeVocabulary,
    templates: TemplateSet,
    index: VectorIndex,
    pool: dict[str, CorpusEntry],
    backend: EmbeddingBackend,
    k: int = 5,
) -> tuple[PromptBundle, tuple[str, ...]]:
    """Retrieval prompt: like prompt engineering with retrieved examples."""
    pairs, retrieved_ids = retrieve_examples(question, dialect, index, pool, backend, k)
    if not pairs:
        raise MissingExamples(dialect)
    bundle = _bundle(
        question,
        dialect,
        schema_context,
        render_vocabulary(vocabulary, include_values=True),
        render_examples(pairs, dialect),
        templates,
    )
    return bundle, retrieved_ids


# Entity names are attribute-shaped tokens; keeping the name strict
# stops JSON list output from masquerading as a bracket line.
_BINDING_RE = re.compile(r"^\s*\[\s*([A-Za-z_][A-Za-z0-9_. -]*?)\s*:\s*(.*?)\s*\]\s*$")


def parse_entity_output(raw: str) -> tuple[tuple[EntityBinding, ...], tuple[str, ...]]:
    """Read agent 1's output into bindings.

    Primary form is one "[attribute: value]" per line; a JSON object or
    list of {entity, value} objects is accepted as a fallback. Anything
    unparseable is dropped; if nothing parses from a non-empty output a
    warning note is returned instead of an error, because an empty
    binding set is a legitimate answer.
    """
    bindings: list[EntityBinding] = []
    for line in raw.splitlines():
        m = _BINDING_RE.match(line)
        if m:
            bindings.append(EntityBinding(m.group(1).strip(), m.group(2).strip()))
    if not bindings:
        bindings = _json_bindings(raw)
    if not bindings and raw.strip():
        return (), ("entity extraction output had no parseable bindings",)
    return tuple(bindings), ()


def _json_bindings(raw: str) -> list[EntityBinding]:
    try:
        data = json.loads(raw)
    except ValueError:
        return []
    if isinstance(data, dict):
        return [
            EntityBinding(str(k), str(v))
            for k, v in data.items()
            if isinstance(v, (str, int, float, bool))
        ]
    if isinstance(data, list):
        out = []
        for item in data:
            if isinstance(item, dict) and "entity" in item and "value" in item:
                out.append(EntityBinding(str(item["entity"]), str(item["value"])))
        return out
    return []


def filter_bindings(
    bindings: tuple[EntityBinding, ...], vocabulary: AttributeVocabulary
) -> tuple[tuple[EntityBinding, ...], tuple[str, ...]]:
    """Drop bindings whose entity is not a vocabulary attribute."""
    kept = []
    notes = []
    for binding in bindings:
        if binding.entity in vocabulary:
            kept.append(binding)
        else:
            notes.append(f"dropped binding for unknown attribute {binding.entity!r}")
    return tuple(kept), tuple(notes)


def resolve_entity_values(
    bindings: tuple[EntityBinding, ...], vocabulary: AttributeVocabulary
) -> str:
    """Reference fragment covering exactly the bound attributes.

    Enumerated attributes expand to their full allowed-value list so
    agent 2 can pick the exact token; other kinds carry their
    description. Duplicate attributes collapse to the first mention.
    """
    seen: set[str] = set()
    lines = []
    for binding in bindings:
        spec = vocabulary.get(binding.entity)
        if spec is None or binding.entity in seen:
            continue
        seen.add(binding.entity)
        if spec.kind == "enumerated":
            values = ", ".join(sorted(spec.allowed_values))
            lines.append(f"- {binding.entity}: one of {values}. Mentioned as {binding.value!r}.")
        else:
            description = spec.description or spec.kind
            lines.append(f"- {binding.entity} ({spec.kind}): {description} Mentioned as {binding.value!r}.")
    return "\n".join(lines)


@dataclass
class GenerationDeps:
    """Everything generate() needs beyond the question itself."""

    backend: ChatBackend
    templates: TemplateSet
    schema_context: SchemaContext
    vocabulary: AttributeVocabulary
    index: VectorIndex | None = None
    pool: dict[str, CorpusEntry] | None = None
    embedding_backend: EmbeddingBackend | None = None
    rag_k: int = 5
    temperature: float = 0.0
    max_tokens: int = 1024
    entity_model: str | None = None
    include_bindings: bool = True
    max_static_examples: int = 4


def generate(
    question: str, strategy: str, dialect: Dialect, model: str, deps: GenerationDeps
) -> GenerationTrace:
    """Run one strategy end to end and return its trace."""
    if strategy not in STRATEGIES:
        raise UnknownStrategy(strategy)
    if not question or not question.strip():
        raise ValueError("question must be non-empty")
    if strategy == "prompt_engineering":
        bundle = build_prompt_engineering(
            question,
            dialect,
            deps.schema_context,
            deps.vocabulary,
            deps.templates,
            deps.max_static_examples,
        )
        return _complete_and_extract(question, strategy, dialect, model, (bundle,), deps)
    if strategy == "rag":
        index, pool, embedding_backend = _require_retrieval(deps, strategy)
        bundle, retrieved_ids = build_rag(
            question,
            dialect,
            deps.schema_context,
            deps.vocabulary,
            deps.templates,
            index,
            pool,
            embedding_backend,
            deps.rag_k,
        )
        return _complete_and_extract(
            question, strategy, dialect, model, (bundle,), deps, retrieved_ids=retrieved_ids
        )
    return _generate_agentic(question, dialect, model, deps)


def _require_retrieval(deps: GenerationDeps, strategy: str):
    if deps.index is None or deps.pool is None or deps.embedding_backend is None:
        raise StrategyError(f"{strategy} needs an index, example pool and embedding backend")
    return deps.index, deps.pool, deps.embedding_backend


def _complete_and_extract(
    question: str,
    strategy: str,
    dialect: Dialect,
    model: str,
    prompts: tuple[PromptBundle, ...],
    deps: GenerationDeps,
    raw_outputs: tuple[str, ...] = (),
    bindings: tuple[EntityBinding, ...] | None = None,
    retrieved_ids: tuple[str, ...] | None = None,
    notes: tuple[str, ...] = (),
) -> GenerationTrace:
    """Run the final completion for `prompts[-1]` and extract the query."""
    trace = GenerationTrace(
        question=question,
        strategy=strategy,
        model=model,
        dialect=dialect,
        prompts=prompts,
        raw_outputs=raw_outputs,
        extracted_query=None,
        bindings=bindings,
        retrieved_ids=retrieved_ids,
        notes=notes,
    )
    request = ChatRequest(
        model=model,
        messages=prompts[-1].messages(),
        temperature=deps.temperature,
        max_tokens=deps.max_tokens,
    )
    try:
        response = deps.backend.complete(request)
    except GatewayError as err:
        return _with(trace, notes=notes + (f"completion failed: {err}",))
    outputs = raw_outputs + (response.text,)
    try:
        extracted = extract_query(response.text, dialect)
    except NoQueryFound as err:
        return _with(trace, raw_outputs=outputs, notes=notes + (str(err),))
    return _with(trace, raw_outputs=outputs, extracted_query=extracted)


def _with(trace: GenerationTrace, **changes) -> GenerationTrace:
    return replace(trace, **changes)


def _generate_agentic(
    question: str, dialect: Dialect, model: str, deps: GenerationDeps
) -> GenerationTrace:
    index, pool, embedding_backend = _require_retrieval(deps, "agentic")
    entity_instruction = deps.templates.entity_instruction.strip()
    entity_context = deps.templates.entity_context.format(
        values_fragment=render_vocabulary(deps.vocabulary, include_values=False)
    ).strip()
    entity_bundle = PromptBundle(
        instruction=entity_instruction, question=question.strip(), context=entity_context
    )
    entity_model = deps.entity_model or model
    entity_request = ChatRequest(
        model=entity_model,
        messages=entity_bundle.messages(),
        temperature=deps.temperature,
        max_tokens=deps.max_tokens,
    )
    try:
        entity_response = deps.backend.complete(entity_request)
    except GatewayError as err:
        return GenerationTrace(
            question=question,
            strategy="agentic",
            model=model,
            dialect=dialect,
            prompts=(entity_bundle,),
            raw_outputs=(),
            extracted_query=None,
            notes=(f"entity extraction failed: {err}",),
        )

    bindings, parse_notes = parse_entity_output(entity_response.text)
    bindings, drop_notes = filter_bindings(bindings, deps.vocabulary)
    notes = parse_notes + drop_notes

    pairs, retrieved_ids = retrieve_examples(
        question, dialect, index, pool, embedding_backend, deps.rag_k
    )
    if not pairs:
        raise MissingExamples(dialect)

    fragment_parts = []
    if deps.include_bindings and bindings:
        listing = "\n".join(f"[{b.entity}: {b.value}]" for b in bindings)
        fragment_parts.append(f"Constraints extracted from the question:\n{listing}")
    resolved = resolve_entity_values(bindings, deps.vocabulary)
    if resolved:
        fragment_parts.append(resolved)
    if not fragment_parts:
        fragment_parts.append("No constraints were extracted from the question.")

    generation_bundle = _bundle(
        question,
        dialect,
        deps.schema_context,
        "\n\n".join(fragment_parts),
        render_examples(pairs, dialect),
        deps.templates,
    )
    return _complete_and_extract(
        question,
        "agentic",
        dialect,
        model,
        (entity_bundle, generation_bundle),
        deps,
        raw_outputs=(entity_response.text,),
        bindings=bindings,
        retrieved_ids=retrieved_ids,
        notes=notes,
    )
