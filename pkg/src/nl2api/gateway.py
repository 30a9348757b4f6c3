"""LLM chat gateway with cassette record/replay.

Every completion goes through one of three backends: `LiveBackend`
(OpenAI-compatible chat endpoint over HTTP), `ScriptedBackend` (replays
a cassette, no network), or `RecordingBackend` (live + append to a
cassette). Requests are keyed by a hash of (model, messages,
temperature), so a cassette recorded once replays the exact same
conversation deterministically.

Cassette records are JSONL:

    {"key_hash": ..., "model": ..., "messages": [...], "response_text": ...}

The full key material is stored alongside the hash; replay verifies it
to rule out silent hash collisions.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Protocol

from nl2api.errors import Nl2ApiError
from nl2api.query_model import Dialect

TOKEN_ENV_VAR = "NL2API_LLM_TOKEN"


class GatewayError(Nl2ApiError):
    pass


class Timeout(GatewayError):
    pass


class Unauthorized(GatewayError):
    pass


class UpstreamError(GatewayError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"LLM endpoint returned HTTP {status}" + (f": {detail}" if detail else ""))


class CassetteMiss(GatewayError):
    def __init__(self, key_hash: str, detail: str = "no recorded response"):
        self.key_hash = key_hash
        super().__init__(f"cassette miss for {key_hash}: {detail}")


class NoQueryFound(GatewayError):
    """Model output contains nothing that looks like a query."""


@dataclass(frozen=True)
class ChatMessage:
    role: Literal["system", "user", "assistant"]
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    model: str
    latency_ms: float
    backend: Literal["live", "scripted"]


def request_key(request: ChatRequest) -> tuple[str, str]:
    """(key_hash, key_material) identifying a request in a cassette.

    The material is canonical JSON over model, messages and temperature;
    max_tokens deliberately stays out so a limit tweak does not orphan
    recorded conversations.
    """
    material = json.dumps(
        {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    key_hash = hashlib.blake2b(material.encode("utf-8"), digest_size=8).hexdigest()
    return key_hash, material


class CassetteStore:
    """JSONL-backed store of recorded completions."""

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
                    self._records[record["key_hash"]] = record

    def __len__(self) -> int:
        return len(self._records)

    def lookup(self, request: ChatRequest) -> str:
        key_hash, material = request_key(request)
        record = self._records.get(key_hash)
        if record is None:
            raise CassetteMiss(key_hash)
        stored = json.dumps(
            {
                "model": record["model"],
                "messages": record["messages"],
                "temperature": record.get("temperature", 0.0),
            },
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
        )
        if stored != material:
            raise CassetteMiss(key_hash, "hash collision: stored request differs")
        return record["response_text"]

    def append(self, request: ChatRequest, response_text: str) -> None:
        key_hash, _ = request_key(request)
        record = {
            "key_hash": key_hash,
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "response_text": response_text,
        }
        with self._lock:
            self._records[key_hash] = record
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class ChatBackend(Protocol):
    kind: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class ScriptedBackend:
    """Cassette replay; latency pinned to zero for determinism."""

    kind = "scripted"

    def __init__(self, store: CassetteStore):
        self.store = store

    def complete(self, request: ChatRequest) -> ChatResponse:
        text = self.store.lookup(request)
        return ChatResponse(text=text, model=request.model, latency_ms=0.0, backend="scripted")


class LiveBackend:
    """OpenAI-compatible chat-completions client.

    Transient failures (transport errors, 5xx) are retried once; a 401
    maps to Unauthorized, timeouts to Timeout, anything else non-2xx to
    UpstreamError.
    """

    kind = "live"

    def __init__(self, endpoint: str, token: str | None = None, timeout: float = 60.0):
        import httpx

        if not endpoint:
            raise ValueError("LLM endpoint must be configured for live mode")
        self.endpoint = endpoint
        self._headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(timeout=timeout)

    def complete(self, request: ChatRequest) -> ChatResponse:
        import httpx

        payload = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        started = time.perf_counter()
        response = None
        last_error: Exception | None = None
        for attempt in (0, 1):
            try:
                response = self._client.post(self.endpoint, json=payload, headers=self._headers)
            except httpx.TimeoutException as err:
                last_error = Timeout(f"LLM request timed out: {err}")
                continue
            except httpx.HTTPError as err:
                last_error = UpstreamError(0, f"transport failure: {err}")
                continue
            if response.status_code >= 500 and attempt == 0:
                last_error = UpstreamError(response.status_code)
                continue
            break
        if response is None:
            assert last_error is not None
            raise last_error
        latency_ms = (time.perf_counter() - started) * 1000.0
        if response.status_code == 401:
            raise Unauthorized("LLM endpoint rejected the token (HTTP 401)")
        if not 200 <= response.status_code < 300:
            raise UpstreamError(response.status_code, response.text[:200])
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as err:
            raise UpstreamError(response.status_code, f"malformed completion body: {err}") from err
        return ChatResponse(
            text=text or "", model=request.model, latency_ms=latency_ms, backend="live"
        )


class RecordingBackend:
    """Live completion that also appends to a cassette."""

    kind = "live"

    def __init__(self, live: LiveBackend, store: CassetteStore):
        self.live = live
        self.store = store

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.live.complete(request)
        self.store.append(request, response.text)
        return response


_FENCE_RE = re.compile(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", re.DOTALL)
_URL_RE = re.compile(r"https?://[^\s\"'`<>]+")
_PATH_RE = re.compile(r"/api/[^\s\"'`<>]*")
_QUERY_HEAD_RE = re.compile(r"(\bquery\b(?:\s+[_A-Za-z][_0-9A-Za-z]*)?\s*)\Z")
_TRAILING_PUNCT = ".,;:!?)'\""


def extract_query(raw: str, dialect: Dialect) -> str:
    """Pull the first plausible query out of free-form model output.

    Fenced code blocks are preferred over surrounding prose; REST looks
    for a URL or /api/ path, GraphQL for a brace-balanced block starting
    at a `query` keyword or bare "{". Raises NoQueryFound when nothing
    matches. Idempotent: extracting from an extracted query returns it
    unchanged.
    """
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    candidates.append(raw)
    for candidate in candidates:
        found = _extract_one(candidate, dialect)
        if found:
            return found
    raise NoQueryFound(f"no {dialect.value} query in model output")


def _extract_one(text: str, dialect: Dialect) -> str | None:
    if dialect is Dialect.REST:
        m = _URL_RE.search(text) or _PATH_RE.search(text)
        if not m:
            return None
        return m.group().rstrip(_TRAILING_PUNCT)
    return _extract_graphql_block(text)


def _extract_graphql_block(text: str) -> str | None:
    open_pos = text.find("{")
    if open_pos == -1:
        return None
    start = open_pos
    head = _QUERY_HEAD_RE.search(text[:open_pos])
    if head:
        start = head.start(1)
    end = _match_brace(text, open_pos)
    if end == -1:
        return None
    return text[start : end + 1].strip()


def _match_brace(text: str, open_pos: int) -> int:
    """Index of the brace closing text[open_pos], quote-aware; -1 if none."""
    depth = 0
    in_string = False
    i = open_pos
    n = len(text)
    while i < n:
        c = text[i]
        if in_string:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_string = False
        elif c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
        i += 1
    return -1
