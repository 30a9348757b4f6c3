"""Corpus, vocabulary and schema-context loading.

The corpus is a JSONL file of expert-annotated samples: one natural
language question plus its reference query in one or both dialects.
Loading validates eagerly so that a bad record is reported with its
line number instead of failing halfway through an evaluation run.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from nl2api.errors import Nl2ApiError
from nl2api.query_model import Dialect, QueryModelError, parse

VALUE_KINDS = ("enumerated", "numeric", "free_text", "identifier")


class CorpusError(Nl2ApiError):
    pass


class MalformedRecord(CorpusError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class DuplicateId(CorpusError):
    def __init__(self, entry_id: str):
        self.entry_id = entry_id
        super().__init__(f"duplicate corpus id {entry_id!r}")


class UnparseableQuery(CorpusError):
    def __init__(self, entry_id: str, dialect: Dialect, cause: Exception):
        self.entry_id = entry_id
        self.dialect = dialect
        self.cause = cause
        super().__init__(f"entry {entry_id!r}: {dialect.value} query does not parse: {cause}")


class CorpusTooSmall(CorpusError):
    pass


class MalformedVocabulary(CorpusError):
    pass


class EnumeratedWithoutValues(MalformedVocabulary):
    def __init__(self, attribute: str):
        self.attribute = attribute
        super().__init__(f"enumerated attribute {attribute!r} lists no values")


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    question: str
    rest_query: str | None = None
    graphql_query: str | None = None
    tags: tuple[str, ...] = ()

    def query_for(self, dialect: Dialect) -> str | None:
        if dialect is Dialect.REST:
            return self.rest_query
        return self.graphql_query


def load_corpus(path: str | Path) -> list[CorpusEntry]:
    """Load and validate a JSONL corpus file.

    Blank lines are tolerated; anything else must be a JSON object with
    a unique non-empty `id`, a `question`, and at least one of
    `rest_query` / `graphql_query`, both of which must parse.
    """
    entries: list[CorpusEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise MalformedRecord(line_no, f"not valid JSON ({err.msg})") from err
            if not isinstance(record, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            entry = _entry_from_record(record, line_no)
            if entry.id in seen:
                raise DuplicateId(entry.id)
            seen.add(entry.id)
            _check_queries_parse(entry)
            entries.append(entry)
    return entries


def _entry_from_record(record: dict, line_no: int) -> CorpusEntry:
    entry_id = record.get("id")
    question = record.get("question")
    if not isinstance(entry_id, str) or not entry_id:
        raise MalformedRecord(line_no, "missing or empty 'id'")
    if not isinstance(question, str) or not question.strip():
        raise MalformedRecord(line_no, "missing or empty 'question'")
    rest_query = record.get("rest_query")
    graphql_query = record.get("graphql_query")
    for name, value in (("rest_query", rest_query), ("graphql_query", graphql_query)):
        if value is not None and not isinstance(value, str):
            raise MalformedRecord(line_no, f"{name} must be a string")
    if not rest_query and not graphql_query:
        raise MalformedRecord(line_no, "entry carries no query in either dialect")
    tags = record.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise MalformedRecord(line_no, "tags must be a list of strings")
    return CorpusEntry(
        id=entry_id,
        question=question,
        rest_query=rest_query or None,
        graphql_query=graphql_query or None,
        tags=tuple(tags),
    )


def _check_queries_parse(entry: CorpusEntry) -> None:
    for dialect in Dialect:
        text = entry.query_for(dialect)
        if text is None:
            continue
        try:
            parse(text, dialect)
        except QueryModelError as err:
            raise UnparseableQuery(entry.id, dialect, err) from err


def save_corpus(entries: list[CorpusEntry], path: str | Path) -> None:
    """Write entries back out as JSONL, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            record: dict = {"id": entry.id, "question": entry.question}
            if entry.rest_query:
                record["rest_query"] = entry.rest_query
            if entry.graphql_query:
                record["graphql_query"] = entry.graphql_query
            if entry.tags:
                record["tags"] = list(entry.tags)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def split_corpus(
    entries: list[CorpusEntry], test_fraction: float, seed: int
) -> tuple[list[CorpusEntry], list[CorpusEntry]]:
    """Split into (dev, test) deterministically.

    The test size is round-half-up of n * test_fraction, clamped so both
    splits stay non-empty. Membership comes from a seeded shuffle of
    indices; file order is preserved inside each split.
    """
    n = len(entries)
    if n < 2:
        raise CorpusTooSmall(f"need at least 2 entries to split, have {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    n_test = int(n * test_fraction + 0.5)
    n_test = max(1, min(n - 1, n_test))
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    test_idx = set(indices[:n_test])
    dev = [e for i, e in enumerate(entries) if i not in test_idx]
    test = [e for i, e in enumerate(entries) if i in test_idx]
    return dev, test


@dataclass(frozen=True)
class AttributeSpec:
    kind: str
    description: str = ""
    allowed_values: frozenset[str] = frozenset()

    def resolves(self, value: str) -> bool:
        """Case-insensitive membership test for enumerated attributes."""
        if self.kind != "enumerated":
            return True
        folded = value.strip().casefold()
        return any(folded == v.casefold() for v in self.allowed_values)


@dataclass(frozen=True)
class AttributeVocabulary:
    attributes: Mapping[str, AttributeSpec] = field(default_factory=dict)

    def __contains__(self, attribute: str) -> bool:
        return self._lookup(attribute) is not None

    def get(self, attribute: str) -> AttributeSpec | None:
        return self._lookup(attribute)

    def _lookup(self, attribute: str) -> AttributeSpec | None:
        if attribute in self.attributes:
            return self.attributes[attribute]
        folded = attribute.casefold()
        for name, spec in self.attributes.items():
            if name.casefold() == folded:
                return spec
        return None

    def resolve(self, attribute: str, value: str) -> bool:
        spec = self._lookup(attribute)
        if spec is None:
            return False
        return spec.resolves(value)

    def names(self) -> list[str]:
        return sorted(self.attributes)


def load_vocabulary(path: str | Path) -> AttributeVocabulary:
    """Load the attribute vocabulary from YAML.

    Top-level map keyed by attribute name; each entry carries `kind`
    (enumerated / numeric / free_text / identifier), an optional
    `description`, and `values` for enumerated kinds.
    """
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or not data:
        raise MalformedVocabulary("vocabulary must be a non-empty mapping")
    attributes: dict[str, AttributeSpec] = {}
    for name, spec in data.items():
        if not isinstance(spec, dict):
            raise MalformedVocabulary(f"attribute {name!r} must map to an object")
        kind = spec.get("kind")
        if kind not in VALUE_KINDS:
            raise MalformedVocabulary(
                f"attribute {name!r} has unknown kind {kind!r} (expected one of {VALUE_KINDS})"
            )
        values = spec.get("values", [])
        if values and (
            not isinstance(values, list) or not all(isinstance(v, str) for v in values)
        ):
            raise MalformedVocabulary(f"attribute {name!r}: values must be strings")
        if kind == "enumerated" and not values:
            raise EnumeratedWithoutValues(name)
        attributes[name] = AttributeSpec(
            kind=kind,
            description=str(spec.get("description", "")),
            allowed_values=frozenset(values),
        )
    return AttributeVocabulary(attributes)


@dataclass(frozen=True)
class SchemaContext:
    """Static prompt material: schema description, API rules, examples."""

    schema_text: str
    api_rules: str
    static_examples: Mapping[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)

    def examples_for(self, dialect: Dialect) -> tuple[tuple[str, str], ...]:
        return tuple(self.static_examples.get(dialect.value, ()))


def load_schema_context(path: str | Path) -> SchemaContext:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise CorpusError("schema context must be a mapping")
    schema_text = data.get("schema", "")
    api_rules = data.get("rules", "")
    if not isinstance(schema_text, str) or not schema_text.strip():
        raise CorpusError("schema context needs a non-empty 'schema' text")
    if not isinstance(api_rules, str):
        raise CorpusError("'rules' must be a string")
    raw_examples = data.get("examples", {})
    if not isinstance(raw_examples, dict):
        raise CorpusError("'examples' must map dialect to a list")
    examples: dict[str, tuple[tuple[str, str], ...]] = {}
    for dialect_name, items in raw_examples.items():
        if dialect_name not in (d.value for d in Dialect):
            raise CorpusError(f"unknown dialect {dialect_name!r} in examples")
        pairs = []
        for item in items or []:
            if not isinstance(item, dict) or "question" not in item or "query" not in item:
                raise CorpusError(f"{dialect_name} example needs 'question' and 'query'")
            pairs.append((str(item["question"]), str(item["query"])))
        examples[dialect_name] = tuple(pairs)
    return SchemaContext(schema_text=schema_text, api_rules=api_rules, static_examples=examples)


def lint_corpus(entries: list[CorpusEntry], vocabulary: AttributeVocabulary) -> list[str]:
    """Cross-check corpus filters against the vocabulary.

    Returns human-readable warnings; an empty list means clean. Queries
    are known to parse (load_corpus guarantees it), so failures here are
    vocabulary drift, not syntax.
    """
    warnings: list[str] = []
    for entry in entries:
        for dialect in Dialect:
            text = entry.query_for(dialect)
            if text is None:
                continue
            query = parse(text, dialect)
            for f in sorted(query.filters, key=lambda f: f.attribute):
                # Dotted GraphQL paths check their leaf attribute name.
                leaf = f.attribute.rsplit(".", 1)[-1]
                spec = vocabulary.get(leaf)
                if spec is None:
                    warnings.append(
                        f"{entry.id} [{dialect.value}]: attribute {f.attribute!r} not in vocabulary"
                    )
                    continue
                if spec.kind != "enumerated":
                    continue
                for value in sorted(f.values, key=lambda v: v.canonical):
                    if not spec.resolves(value.canonical):
                        warnings.append(
                            f"{entry.id} [{dialect.value}]: value {value.canonical!r} "
                            f"not allowed for {f.attribute!r}"
                        )
    return warnings
