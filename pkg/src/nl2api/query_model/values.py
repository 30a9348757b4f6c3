"""Filter value normalization shared by the REST and GraphQL parsers.

Every value that enters a canonical query goes through `normalize` (or a
dialect-aware constructor) exactly once. Normalization is idempotent:
feeding a canonical form back in yields the same canonical form, so
queries that only differ in value spelling compare equal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class ValueKind(str, Enum):
    NUMBER = "number"
    TEXT = "text"
    BOOLEAN = "boolean"
    IDENTIFIER = "identifier"


# No exponent notation: the API's numeric params are plain ints/decimals.
_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class NormalizedValue:
    """A single filter value in canonical form.

    `raw` keeps the spelling found in the source text for traceability;
    equality and hashing look only at `canonical` so that e.g. "1000.0"
    and "1000" are one value.
    """

    raw: str
    kind: ValueKind
    canonical: str

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NormalizedValue):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self) -> int:
        return hash(self.canonical)

    @property
    def comparison_key(self) -> str:
        """Key used when value sets are compared across dialects.

        Numbers compare exactly on canonical form; everything else is
        casefolded so enum spellings like CONTRACT_CANCELED and
        contract_canceled count as the same value.
        """
        if self.kind is ValueKind.NUMBER:
            return self.canonical
        return self.canonical.casefold()


def canonical_number(text: str) -> str:
    """Collapse a numeric literal to its minimal decimal spelling.

    Strips an explicit "+", leading integer zeros and trailing fraction
    zeros, drops a dot with no remaining fraction, and folds "-0" to "0".
    """
    sign = ""
    if text and text[0] in "+-":
        sign = "-" if text[0] == "-" else ""
        text = text[1:]
    int_part, _, frac_part = text.partition(".")
    int_part = int_part.lstrip("0") or "0"
    frac_part = frac_part.rstrip("0")
    out = int_part + ("." + frac_part if frac_part else "")
    if out == "0":
        sign = ""
    return sign + out


def normalize(raw: str) -> NormalizedValue:
    """Classify a raw value string and build its canonical form.

    Classification order matters: "true" is a boolean even though it
    also matches the identifier shape.
    """
    stripped = raw.strip()
    lowered = stripped.lower()
    if lowered in ("true", "false"):
        return NormalizedValue(raw, ValueKind.BOOLEAN, lowered)
    if _NUMBER_RE.fullmatch(stripped):
        return NormalizedValue(raw, ValueKind.NUMBER, canonical_number(stripped))
    if _IDENTIFIER_RE.fullmatch(stripped):
        return NormalizedValue(raw, ValueKind.IDENTIFIER, stripped)
    return NormalizedValue(raw, ValueKind.TEXT, stripped)


def from_typed(raw: str, kind: ValueKind) -> NormalizedValue:
    """Build a value whose kind is already known from dialect syntax.

    The GraphQL lexer distinguishes string literals from enum names and
    number tokens, so it bypasses classification and only applies the
    per-kind canonical rules. A quoted "1000" stays TEXT (it still
    compares equal to the number via the canonical string).
    """
    if kind is ValueKind.NUMBER:
        return NormalizedValue(raw, kind, canonical_number(raw.strip()))
    if kind is ValueKind.BOOLEAN:
        return NormalizedValue(raw, kind, raw.strip().lower())
    return NormalizedValue(raw, kind, raw.strip())
