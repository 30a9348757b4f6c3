"""Query execution against the Land Matrix API, live or replayed.

Execution results never raise for API-level failures: a 4xx/5xx status,
an unparseable body or a GraphQL errors array all come back as a normal
ExecutionResult with valid=False, because "the model produced a query
the API rejects" is a measurement, not an error. Only infrastructure
problems (transport failures, cassette misses) raise.

The cassette key is the canonical serialization of the query when it
parses, so cosmetic differences (parameter order, spacing) replay the
same recorded exchange. Unparseable queries key by their raw text:
they may still execute fine server side and the harness must be able
to replay that.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit, urlunsplit

from nl2api.errors import Nl2ApiError
from nl2api.query_model import Dialect, QueryModelError, parse, serialize

DEFAULT_REST_BASE = "https://landmatrix.org/api/"
DEFAULT_GRAPHQL_URL = "https://landmatrix.org/graphql/"

# Sentinel status codes for results that never reached the API.
NOT_EXECUTED = 0
TRANSPORT_ERROR = -1


class ExecutorError(Nl2ApiError):
    pass


class Transport(ExecutorError):
    def __init__(self, cause: Exception):
        self.cause = cause
        super().__init__(f"transport failure: {cause}")


class ApiCassetteMiss(ExecutorError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no recorded API exchange for key {key!r}")


class RateLimited(ExecutorError):
    pass


class ShapeUnrecognized(ExecutorError):
    """Payload parses as JSON but matches no known result shape."""


@dataclass(frozen=True)
class ExecutionResult:
    status: int
    payload: Any
    valid: bool
    result_ids: frozenset[int]
    source: str  # "live" | "cassette"
    warning: str | None = None

    def __post_init__(self) -> None:
        if not self.valid and self.result_ids:
            raise ValueError("invalid results cannot carry result ids")


def is_valid(status: int, body_text: str, dialect: Dialect) -> bool:
    """Whether a response counts as validly executed, total over any (status, body) pair.

    REST: 2xx and the body parses as JSON. GraphQL: 2xx, parses, and the
    body has no top-level "errors" member (GraphQL reports failures with
    HTTP 200).
    """
    if not 200 <= status < 300:
        return False
    try:
        payload = json.loads(body_text)
    except (ValueError, TypeError):
        return False
    if dialect is Dialect.GRAPHQL:
        if not isinstance(payload, dict) or "errors" in payload:
            return False
    return True


def extract_result_records(payload: Any, dialect: Dialect) -> list[dict]:
    """The list of result objects inside a valid payload.

    REST payloads are either a bare list or {"results": [...]}; GraphQL
    payloads carry the list under data.<root field>. Anything else
    raises ShapeUnrecognized.
    """
    if dialect is Dialect.REST:
        if isinstance(payload, list):
            records = payload
        elif isinstance(payload, dict) and isinstance(payload.get("results"), list):
            records = payload["results"]
        else:
            raise ShapeUnrecognized("REST payload is neither a list nor {'results': [...]}")
    else:
        data = payload.get("data") if isinstance(payload, dict) else None
        if not isinstance(data, dict) or not data:
            raise ShapeUnrecognized("GraphQL payload has no data object")
        root = next(iter(data.values()))
        if isinstance(root, list):
            records = root
        elif isinstance(root, dict):
            records = [root]
        else:
            raise ShapeUnrecognized("GraphQL data root is neither a list nor an object")
    return [r for r in records if isinstance(r, dict)]


def extract_result_ids(payload: Any, dialect: Dialect) -> frozenset[int]:
    """Integer ids of the result records; items without one are skipped."""
    ids: set[int] = set()
    for record in extract_result_records(payload, dialect):
        value = record.get("id")
        if isinstance(value, bool):
            continue
        if isinstance(value, int):
            ids.add(value)
        elif isinstance(value, str) and value.isdigit():
            ids.add(int(value))
    return frozenset(ids)


def cassette_key(query_text: str, dialect: Dialect) -> str:
    """Canonical replay key: serialized canonical form when parseable."""
    try:
        canonical = serialize(parse(query_text, dialect))
    except (QueryModelError, ValueError):
        canonical = query_text.strip()
    return f"{dialect.value}|{canonical}"


class TokenBucket:
    """Blocking rate limiter shared by every live call in the process."""

    def __init__(self, rate_per_s: float, capacity: float | None = None):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_s
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_s)
        self._tokens = self.capacity
        self._updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self, timeout: float = 60.0) -> None:
        deadline = time.monotonic() + timeout
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                needed = (1.0 - self._tokens) / self.rate
            if time.monotonic() + needed > deadline:
                raise RateLimited(f"rate limiter blocked longer than {timeout}s")
            time.sleep(needed)


class ApiCassette:
    """JSONL store of recorded API exchanges keyed by canonical query."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._records[record["key"]] = record

    def __len__(self) -> int:
        return len(self._records)

    def lookup(self, key: str) -> dict:
        record = self._records.get(key)
        if record is None:
            raise ApiCassetteMiss(key)
        return record

    def append(self, key: str, dialect: Dialect, status: int, body_text: str) -> None:
        record = {
            "key": key,
            "dialect": dialect.value,
            "status": status,
            "body_text": body_text,
            "recorded_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        with self._lock:
            self._records[key] = record
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class ApiExecutor:
    """Executes query text in live, cassette or record mode."""

    def __init__(
        self,
        mode: str = "cassette",
        rest_base: str = DEFAULT_REST_BASE,
        graphql_url: str = DEFAULT_GRAPHQL_URL,
        cassette: ApiCassette | None = None,
        rate_per_s: float = 2.0,
        timeout: float = 30.0,
    ):
        if mode not in ("live", "cassette", "record"):
            raise ValueError(f"unknown executor mode {mode!r}")
        if mode in ("cassette", "record") and cassette is None:
            raise ValueError(f"{mode} mode needs a cassette")
        self.mode = mode
        self.rest_base = rest_base if rest_base.endswith("/") else rest_base + "/"
        self.graphql_url = graphql_url
        self.cassette = cassette
        self.limiter = TokenBucket(rate_per_s)
        self.timeout = timeout
        self._client = None

    def execute(self, query_text: str | None, dialect: Dialect) -> ExecutionResult:
        if not query_text or not query_text.strip():
            return ExecutionResult(
                status=NOT_EXECUTED,
                payload=None,
                valid=False,
                result_ids=frozenset(),
                source="cassette" if self.mode == "cassette" else "live",
                warning="no query to execute",
            )
        key = cassette_key(query_text, dialect)
        if self.mode == "cassette":
            record = self.cassette.lookup(key)
            return self._build_result(record["status"], record["body_text"], dialect, "cassette")
        status, body_text = self._call(query_text, dialect)
        if self.mode == "record":
            self.cassette.append(key, dialect, status, body_text)
        return self._build_result(status, body_text, dialect, "live")

    def resolve_url(self, query_text: str) -> str:
        """Absolute REST URL for any accepted input shape."""
        text = query_text.strip()
        if text.startswith(("http://", "https://")):
            return text
        if text.startswith("/"):
            base = urlsplit(self.rest_base)
            return urlunsplit((base.scheme, base.netloc, "", "", "")) + text
        if text.startswith("?"):
            return self.rest_base + "deals/" + text
        return self.rest_base + "deals/?" + text

    def _call(self, query_text: str, dialect: Dialect) -> tuple[int, str]:
        import httpx

        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout, follow_redirects=True)
        self.limiter.acquire()
        try:
            if dialect is Dialect.REST:
                response = self._client.get(self.resolve_url(query_text))
            else:
                response = self._client.post(self.graphql_url, json={"query": query_text})
        except httpx.HTTPError as err:
            raise Transport(err) from err
        return response.status_code, response.text

    def _build_result(
        self, status: int, body_text: str, dialect: Dialect, source: str
    ) -> ExecutionResult:
        valid = is_valid(status, body_text, dialect)
        if not valid:
            payload = None
            try:
                payload = json.loads(body_text)
            except (ValueError, TypeError):
                pass
            return ExecutionResult(
                status=status, payload=payload, valid=False, result_ids=frozenset(), source=source
            )
        payload = json.loads(body_text)
        warning = None
        try:
            ids = extract_result_ids(payload, dialect)
        except ShapeUnrecognized as err:
            ids = frozenset()
            warning = str(err)
        return ExecutionResult(
            status=status,
            payload=payload,
            valid=True,
            result_ids=ids,
            source=source,
            warning=warning,
        )
