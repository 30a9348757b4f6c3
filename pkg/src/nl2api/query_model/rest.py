"""REST URL / query-string parser.

Accepts full URLs, absolute paths, bare "?..." strings and naked query
strings; all four shapes land in the same canonical form. Percent
decoding is strict RFC 3986 (no "+" as space), matching how the Land
Matrix API itself reads parameters.
"""

from __future__ import annotations

from urllib.parse import unquote, urlsplit

from nl2api.query_model.errors import EmptyKey, MalformedUrl
from nl2api.query_model.model import CanonicalQuery, Dialect, merge_filters
from nl2api.query_model.values import normalize

DEFAULT_RESOURCE = "deals"


def parse_rest(text: str) -> CanonicalQuery:
    """Parse REST query text into canonical form.

    Repeated parameters merge into one multi-value filter. A pair with
    no "=" is read as an empty-string value; a pair with no name raises
    EmptyKey with its 0-based position.
    """
    raw = text
    stripped = text.strip()
    if not stripped:
        raise MalformedUrl("empty query text")

    if "://" in stripped:
        parts = urlsplit(stripped)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise MalformedUrl(f"not an http(s) URL: {stripped[:80]}")
        path, qs = parts.path, parts.query
    elif stripped.startswith("/"):
        path, _, qs = stripped.partition("?")
    elif stripped.startswith("?"):
        path, qs = "", stripped[1:]
    else:
        # Bare query string like "area_min=1000&country_id=104".
        path, qs = "", stripped

    return CanonicalQuery(
        dialect=Dialect.REST,
        resource=_resource_from_path(path),
        filters=merge_filters(_pairs(qs)),
        selection=frozenset(),
        raw=raw,
    )


def _resource_from_path(path: str) -> str:
    segments = [s for s in path.split("/") if s]
    if segments and segments[0] == "api":
        segments = segments[1:]
    if not segments:
        return DEFAULT_RESOURCE
    return "/".join(segments)


def _pairs(qs: str):
    if not qs:
        return
    for position, pair in enumerate(qs.split("&")):
        if not pair:
            # Tolerate "a=1&&b=2" and trailing "&".
            continue
        key, sep, value = pair.partition("=")
        key = unquote(key)
        if not key:
            raise EmptyKey(position)
        # "flag" with no "=" reads as the empty-string value.
        yield key, normalize(unquote(value) if sep else "")
