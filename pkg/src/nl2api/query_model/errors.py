"""Errors raised while parsing or serializing queries."""

from __future__ import annotations

from nl2api.errors import Nl2ApiError


class QueryModelError(Nl2ApiError):
    """Base for anything the query model can raise."""


class MalformedUrl(QueryModelError):
    """REST input is not a URL, path or query string we can read."""


class EmptyKey(QueryModelError):
    """A query-string pair has no parameter name, e.g. "=5"."""

    def __init__(self, position: int):
        self.position = position
        super().__init__(f"empty parameter name in pair {position}")


class GraphQLSyntaxError(QueryModelError):
    """GraphQL text failed to lex or parse.

    `offset` is a character index into the source text.
    """

    def __init__(self, offset: int, message: str):
        self.offset = offset
        self.message = message
        super().__init__(f"offset {offset}: {message}")


class MultipleOperations(QueryModelError):
    """Document contains more than one operation; only one is supported."""


class EmptySelection(QueryModelError):
    """A selection set contains no fields, e.g. "query { deals { } }"."""
