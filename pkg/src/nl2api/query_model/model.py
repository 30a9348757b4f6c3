"""Canonical query representation and the dialect-aware serializer.

A CanonicalQuery abstracts away everything cosmetic about a query:
parameter order, value spelling, whitespace, percent encoding. Two
queries that request the same thing compare equal regardless of which
dialect quirks they were written with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable
from urllib.parse import quote

from nl2api.query_model.values import NormalizedValue, ValueKind, normalize


class Dialect(str, Enum):
    REST = "REST"
    GRAPHQL = "GRAPHQL"


@dataclass(frozen=True)
class Filter:
    """One attribute constrained to a non-empty set of values."""

    attribute: str
    values: frozenset[NormalizedValue]

    def __post_init__(self) -> None:
        if not self.attribute:
            raise ValueError("filter attribute must be non-empty")
        if not self.values:
            raise ValueError(f"filter {self.attribute!r} has no values")

    @classmethod
    def of(cls, attribute: str, *raw_values: str) -> Filter:
        """Convenience constructor normalizing plain strings."""
        return cls(attribute, frozenset(normalize(v) for v in raw_values))


@dataclass(frozen=True)
class CanonicalQuery:
    """Dialect-tagged canonical form of one query.

    `raw` preserves the source text for traceability but is excluded
    from equality and hashing: canonical equality is the whole point.
    """

    dialect: Dialect
    resource: str
    filters: frozenset[Filter]
    selection: frozenset[str]
    raw: str = field(compare=False)


def filter_set(query: CanonicalQuery) -> frozenset[Filter]:
    """The query's filters as a set keyed by attribute."""
    return query.filters


def merge_filters(pairs: Iterable[tuple[str, NormalizedValue]]) -> frozenset[Filter]:
    """Fold (attribute, value) pairs into one Filter per attribute.

    Repeated attributes union their values; duplicate values collapse
    through NormalizedValue equality on the canonical form.
    """
    by_attr: dict[str, set[NormalizedValue]] = {}
    for attribute, value in pairs:
        by_attr.setdefault(attribute, set()).add(value)
    return frozenset(Filter(a, frozenset(vs)) for a, vs in by_attr.items())


def serialize(query: CanonicalQuery) -> str:
    """Render the canonical form back to executable query text.

    Attributes and values come out in sorted order, so serialization is
    a function of the canonical content alone and parse(serialize(q))
    reproduces q exactly.
    """
    if query.dialect is Dialect.REST:
        return _serialize_rest(query)
    return _serialize_graphql(query)


def _sorted_filters(filters: frozenset[Filter]) -> list[Filter]:
    return sorted(filters, key=lambda f: f.attribute)


def _sorted_values(f: Filter) -> list[NormalizedValue]:
    return sorted(f.values, key=lambda v: v.canonical)


def _serialize_rest(query: CanonicalQuery) -> str:
    path = f"/api/{query.resource}/"
    pairs = []
    for f in _sorted_filters(query.filters):
        key = quote(f.attribute, safe="")
        for v in _sorted_values(f):
            pairs.append(f"{key}={quote(v.canonical, safe='')}")
    if not pairs:
        return path
    return path + "?" + "&".join(pairs)


def _render_value(value: NormalizedValue) -> str:
    # Strings carry GraphQL quoting; numbers, booleans and enum-like
    # identifiers are bare tokens.
    if value.kind is ValueKind.TEXT:
        return json.dumps(value.canonical)
    return value.canonical


def _argument_tree(filters: frozenset[Filter]) -> dict:
    """Unflatten dotted attribute paths into nested argument objects."""
    tree: dict = {}
    for f in _sorted_filters(filters):
        parts = f.attribute.split(".")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ValueError(
                    f"attribute path conflict at {part!r} in {f.attribute!r}"
                )
            node = child
        leaf = parts[-1]
        if leaf in node:
            raise ValueError(
                f"attribute path conflict at {leaf!r} in {f.attribute!r}"
            )
        node[leaf] = f
    return tree


def _render_arguments(tree: dict) -> str:
    rendered = []
    for name in sorted(tree):
        node = tree[name]
        if isinstance(node, dict):
            rendered.append(f"{name}: {{{_render_arguments(node)}}}")
            continue
        values = _sorted_values(node)
        if len(values) == 1:
            rendered.append(f"{name}: {_render_value(values[0])}")
        else:
            inner = ", ".join(_render_value(v) for v in values)
            rendered.append(f"{name}: [{inner}]")
    return ", ".join(rendered)


def _selection_tree(paths: frozenset[str]) -> dict:
    tree: dict = {}
    for path in sorted(paths):
        node = tree
        for part in path.split("."):
            node = node.setdefault(part, {})
    return tree


def _render_selection(tree: dict) -> str:
    rendered = []
    for name in sorted(tree):
        children = tree[name]
        if children:
            rendered.append(f"{name} {{ {_render_selection(children)} }}")
        else:
            rendered.append(name)
    return " ".join(rendered)


def _serialize_graphql(query: CanonicalQuery) -> str:
    args = ""
    if query.filters:
        args = f"({_render_arguments(_argument_tree(query.filters))})"
    if not query.selection:
        # "{ }" would not parse back, so this cannot round-trip.
        raise ValueError("a GraphQL query needs at least one selected field")
    selection = _render_selection(_selection_tree(query.selection))
    return f"query {{ {query.resource}{args} {{ {selection} }} }}"
