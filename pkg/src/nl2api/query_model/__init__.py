"""Canonical query model: parsers, values, serializer."""

from nl2api.query_model.errors import (
    EmptyKey,
    EmptySelection,
    GraphQLSyntaxError,
    MalformedUrl,
    MultipleOperations,
    QueryModelError,
)
from nl2api.query_model.graphql import parse_graphql
from nl2api.query_model.model import (
    CanonicalQuery,
    Dialect,
    Filter,
    filter_set,
    merge_filters,
    serialize,
)
from nl2api.query_model.rest import parse_rest
from nl2api.query_model.values import NormalizedValue, ValueKind, normalize

__all__ = [
    "CanonicalQuery",
    "Dialect",
    "EmptyKey",
    "EmptySelection",
    "Filter",
    "GraphQLSyntaxError",
    "MalformedUrl",
    "MultipleOperations",
    "NormalizedValue",
    "QueryModelError",
    "ValueKind",
    "filter_set",
    "merge_filters",
    "normalize",
    "parse",
    "parse_graphql",
    "parse_rest",
    "serialize",
]


def parse(text: str, dialect: Dialect) -> CanonicalQuery:
    """Dialect-dispatching parse."""
    if dialect is Dialect.REST:
        return parse_rest(text)
    return parse_graphql(text)
