"""GraphQL query parser for the subset the Land Matrix API speaks.

Hand-rolled lexer and recursive-descent parser. The grammar is the
read-only slice of GraphQL: a single (optionally named) query operation,
field arguments with scalar / enum / list / input-object values, and
nested selection sets. Mutations, subscriptions, fragments, variables
and directives are rejected with a syntax error rather than silently
mangled.

Canonicalization notes:

* the first root field names the resource; sibling root fields are
  ignored,
* arguments on the root field flatten into dotted attribute paths
  ("filters: {area_min: 1000}" -> "filters.area_min"), list values
  become multi-value filters, lists of objects union-flatten,
* the selection set reduces to the set of root-to-leaf dotted paths,
  with duplicate sibling fields merged and aliases dropped,
* arguments below the root field are parsed but do not survive into
  the canonical form,
* an unquoted `null` round-trips as the bare identifier token `null`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from nl2api.query_model.errors import (
    EmptySelection,
    GraphQLSyntaxError,
    MultipleOperations,
)
from nl2api.query_model.model import CanonicalQuery, Dialect, merge_filters
from nl2api.query_model.values import NormalizedValue, ValueKind, from_typed

_NAME_RE = re.compile(r"[_A-Za-z][_0-9A-Za-z]*")
_NUMBER_RE = re.compile(r"-?\d+(\.\d+)?")
_ESCAPES = {'"': '"', "\\": "\\", "/": "/", "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t"}


@dataclass(frozen=True)
class _Token:
    kind: str  # name | int | float | string | punct | eof
    value: str
    pos: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n,":
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("...", i):
            tokens.append(_Token("punct", "...", i))
            i += 3
            continue
        if c in "{}()[]:@$":
            tokens.append(_Token("punct", c, i))
            i += 1
            continue
        if c == '"':
            if text.startswith('"""', i):
                raise GraphQLSyntaxError(i, "block strings are not supported")
            value, i = _lex_string(text, i)
            tokens.append(_Token("string", value, i))
            continue
        if c == "-" or c.isdigit():
            m = _NUMBER_RE.match(text, i)
            if not m or (c == "-" and m.group() == "-"):
                raise GraphQLSyntaxError(i, "malformed number literal")
            end = m.end()
            if end < n and text[end] in "eE":
                raise GraphQLSyntaxError(i, "exponent literals are not supported")
            kind = "float" if m.group(1) else "int"
            tokens.append(_Token(kind, m.group(), i))
            i = end
            continue
        m = _NAME_RE.match(text, i)
        if m:
            tokens.append(_Token("name", m.group(), i))
            i = m.end()
            continue
        raise GraphQLSyntaxError(i, f"unexpected character {c!r}")
    tokens.append(_Token("eof", "", n))
    return tokens


def _lex_string(text: str, start: int) -> tuple[str, int]:
    """Decode a double-quoted string starting at `start`.

    Returns (decoded value, index just past the closing quote).
    """
    out: list[str] = []
    i = start + 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == '"':
            return "".join(out), i + 1
        if c == "\n":
            break
        if c == "\\":
            if i + 1 >= n:
                break
            esc = text[i + 1]
            if esc in _ESCAPES:
                out.append(_ESCAPES[esc])
                i += 2
                continue
            if esc == "u":
                hexpart = text[i + 2 : i + 6]
                if len(hexpart) != 4:
                    raise GraphQLSyntaxError(i, "truncated unicode escape")
                try:
                    out.append(chr(int(hexpart, 16)))
                except ValueError:
                    raise GraphQLSyntaxError(i, f"bad unicode escape \\u{hexpart}") from None
                i += 6
                continue
            raise GraphQLSyntaxError(i, f"unknown escape \\{esc}")
        out.append(c)
        i += 1
    raise GraphQLSyntaxError(start, "unterminated string literal")


@dataclass
class _Field:
    name: str
    arguments: list[tuple[str, object]]
    children: list["_Field"] | None


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_punct(self, value: str) -> _Token:
        tok = self.peek()
        if tok.kind != "punct" or tok.value != value:
            raise GraphQLSyntaxError(tok.pos, f"expected {value!r}, found {tok.value or 'end of input'!r}")
        return self.advance()

    def fail_on_extensions(self, tok: _Token) -> None:
        if tok.kind == "punct" and tok.value == "...":
            raise GraphQLSyntaxError(tok.pos, "fragment spreads are not supported")
        if tok.kind == "punct" and tok.value == "$":
            raise GraphQLSyntaxError(tok.pos, "variables are not supported")
        if tok.kind == "punct" and tok.value == "@":
            raise GraphQLSyntaxError(tok.pos, "directives are not supported")

    def parse_document(self) -> list[_Field]:
        roots: list[_Field] | None = None
        while self.peek().kind != "eof":
            fields = self.parse_operation()
            if roots is not None:
                raise MultipleOperations("document defines more than one operation")
            roots = fields
        if roots is None:
            tok = self.peek()
            raise GraphQLSyntaxError(tok.pos, "no operation found")
        return roots

    def parse_operation(self) -> list[_Field]:
        tok = self.peek()
        self.fail_on_extensions(tok)
        if tok.kind == "name":
            if tok.value in ("mutation", "subscription"):
                raise GraphQLSyntaxError(tok.pos, f"{tok.value} operations are not supported")
            if tok.value == "fragment":
                raise GraphQLSyntaxError(tok.pos, "fragment definitions are not supported")
            if tok.value != "query":
                raise GraphQLSyntaxError(tok.pos, f"unexpected name {tok.value!r}")
            self.advance()
            if self.peek().kind == "name":
                self.advance()  # operation name carries no meaning here
            nxt = self.peek()
            if nxt.kind == "punct" and nxt.value == "(":
                raise GraphQLSyntaxError(nxt.pos, "variable definitions are not supported")
            return self.parse_selection_set()
        if tok.kind == "punct" and tok.value == "{":
            return self.parse_selection_set()
        raise GraphQLSyntaxError(tok.pos, f"unexpected token {tok.value!r}")

    def parse_selection_set(self) -> list[_Field]:
        open_tok = self.expect_punct("{")
        fields: list[_Field] = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.value == "}":
                self.advance()
                break
            if tok.kind == "eof":
                raise GraphQLSyntaxError(open_tok.pos, "unbalanced braces")
            fields.append(self.parse_field())
        if not fields:
            raise EmptySelection("selection set has no fields")
        return fields

    def parse_field(self) -> _Field:
        tok = self.peek()
        self.fail_on_extensions(tok)
        if tok.kind != "name":
            raise GraphQLSyntaxError(tok.pos, f"expected field name, found {tok.value!r}")
        name = self.advance().value
        nxt = self.peek()
        if nxt.kind == "punct" and nxt.value == ":":
            # Alias form "alias: field"; the alias is dropped.
            self.advance()
            real = self.peek()
            if real.kind != "name":
                raise GraphQLSyntaxError(real.pos, "expected field name after alias")
            name = self.advance().value
            nxt = self.peek()
        arguments: list[tuple[str, object]] = []
        if nxt.kind == "punct" and nxt.value == "(":
            arguments = self.parse_arguments()
            nxt = self.peek()
        self.fail_on_extensions(nxt)
        children: list[_Field] | None = None
        if nxt.kind == "punct" and nxt.value == "{":
            children = self.parse_selection_set()
        return _Field(name, arguments, children)

    def parse_arguments(self) -> list[tuple[str, object]]:
        open_tok = self.expect_punct("(")
        arguments: list[tuple[str, object]] = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.value == ")":
                self.advance()
                break
            if tok.kind == "eof":
                raise GraphQLSyntaxError(open_tok.pos, "unbalanced parentheses")
            self.fail_on_extensions(tok)
            if tok.kind != "name":
                raise GraphQLSyntaxError(tok.pos, f"expected argument name, found {tok.value!r}")
            arg_name = self.advance().value
            self.expect_punct(":")
            arguments.append((arg_name, self.parse_value()))
        if not arguments:
            raise GraphQLSyntaxError(open_tok.pos, "empty argument list")
        return arguments

    def parse_value(self) -> object:
        tok = self.peek()
        self.fail_on_extensions(tok)
        if tok.kind in ("int", "float"):
            self.advance()
            return from_typed(tok.value, ValueKind.NUMBER)
        if tok.kind == "string":
            self.advance()
            return from_typed(tok.value, ValueKind.TEXT)
        if tok.kind == "name":
            self.advance()
            if tok.value in ("true", "false"):
                return from_typed(tok.value, ValueKind.BOOLEAN)
            return from_typed(tok.value, ValueKind.IDENTIFIER)
        if tok.kind == "punct" and tok.value == "[":
            self.advance()
            items: list[object] = []
            while True:
                nxt = self.peek()
                if nxt.kind == "punct" and nxt.value == "]":
                    self.advance()
                    return items
                if nxt.kind == "eof":
                    raise GraphQLSyntaxError(tok.pos, "unbalanced brackets")
                items.append(self.parse_value())
        if tok.kind == "punct" and tok.value == "{":
            self.advance()
            obj: list[tuple[str, object]] = []
            while True:
                nxt = self.peek()
                if nxt.kind == "punct" and nxt.value == "}":
                    self.advance()
                    return obj
                if nxt.kind == "eof":
                    raise GraphQLSyntaxError(tok.pos, "unbalanced braces in input object")
                if nxt.kind != "name":
                    raise GraphQLSyntaxError(nxt.pos, f"expected input field name, found {nxt.value!r}")
                key = self.advance().value
                self.expect_punct(":")
                obj.append((key, self.parse_value()))
        raise GraphQLSyntaxError(tok.pos, f"unexpected token {tok.value or 'end of input'!r} in value position")


def _flatten_argument(prefix: str, node: object, out: list[tuple[str, NormalizedValue]]) -> None:
    if isinstance(node, NormalizedValue):
        out.append((prefix, node))
    elif isinstance(node, list) and node and isinstance(node[0], tuple):
        # Input object: list of (key, value) pairs.
        for key, value in node:
            _flatten_argument(f"{prefix}.{key}", value, out)
    elif isinstance(node, list):
        for item in node:
            _flatten_argument(prefix, item, out)
    # Empty objects / lists contribute no pairs and vanish here.


def _merge_children(fields: list[_Field], into: dict) -> None:
    for field in fields:
        node = into.setdefault(field.name, {})
        if field.children:
            _merge_children(field.children, node)


def _leaf_paths(tree: dict, prefix: str = "") -> set[str]:
    paths: set[str] = set()
    for name, children in tree.items():
        full = f"{prefix}.{name}" if prefix else name
        if children:
            paths |= _leaf_paths(children, full)
        else:
            paths.add(full)
    return paths


def parse_graphql(text: str) -> CanonicalQuery:
    """Parse GraphQL query text into canonical form."""
    roots = _Parser(_lex(text)).parse_document()
    root = roots[0]
    if root.children is None:
        raise EmptySelection(f"root field {root.name!r} selects no fields")

    pairs: list[tuple[str, NormalizedValue]] = []
    for arg_name, value in root.arguments:
        _flatten_argument(arg_name, value, pairs)

    tree: dict = {}
    _merge_children(root.children, tree)

    return CanonicalQuery(
        dialect=Dialect.GRAPHQL,
        resource=root.name,
        filters=merge_filters(pairs),
        selection=frozenset(_leaf_paths(tree)),
        raw=text,
    )
