"""Embedding backends and the exact-scan vector index.

Retrieval here is deliberately brute force: the corpus is small (tens
to low hundreds of questions), so an exact cosine scan is both fast
enough and exactly reproducible, which the evaluation harness depends
on. top_k calls the same pairwise `cosine` used everywhere else, so
retrieval results are the sorted pairwise scores by construction, with
ties broken by entry id.

Index file layout (version 1):

    nl2api-index v1 <backend_id> <dimension> <count>\n
    <entry ids, tab separated>\n
    <count * dimension little-endian float32>
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from nl2api.errors import Nl2ApiError

INDEX_MAGIC = "nl2api-index"
INDEX_VERSION = "v1"
DEFAULT_EMBEDDING_MODEL = "all-mpnet-base-v2"
DEFAULT_DIMENSION = 768


class VectorError(Nl2ApiError):
    pass


class DimensionMismatch(VectorError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected dimension {expected}, got {got}")


class ZeroVector(VectorError):
    pass


class BackendUnavailable(VectorError):
    pass


class EmptyCorpus(VectorError):
    pass


class MalformedIndexFile(VectorError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A finite float32 vector; the payload array is read-only."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise VectorError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise VectorError("embedding contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in float64, the one scoring function used anywhere."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(a.dimension, b.dimension)
    va = a.values.astype(np.float64)
    vb = b.values.astype(np.float64)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return float(np.dot(va, vb) / (na * nb))


class EmbeddingBackend(Protocol):
    backend_id: str
    dimension: int

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def embed(text: str, backend: EmbeddingBackend) -> EmbeddingVector:
    if not text or not text.strip():
        raise ValueError("cannot embed empty text")
    return backend.embed_batch([text])[0]


class HttpEmbeddingBackend:
    """Embeddings served over HTTP: POST {model, input: [...]} -> {vectors: [...]}."""

    def __init__(
        self,
        endpoint: str,
        model: str = DEFAULT_EMBEDDING_MODEL,
        dimension: int = DEFAULT_DIMENSION,
        timeout: float = 30.0,
    ):
        import httpx

        self.endpoint = endpoint
        self.backend_id = model
        self.dimension = dimension
        self._client = httpx.Client(timeout=timeout)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        import httpx

        try:
            response = self._client.post(
                self.endpoint, json={"model": self.backend_id, "input": list(texts)}
            )
        except httpx.HTTPError as err:
            raise BackendUnavailable(f"embedding endpoint unreachable: {err}") from err
        if response.status_code != 200:
            raise BackendUnavailable(
                f"embedding endpoint returned HTTP {response.status_code}"
            )
        try:
            vectors = response.json()["vectors"]
        except (KeyError, ValueError) as err:
            raise BackendUnavailable(f"embedding response malformed: {err}") from err
        if len(vectors) != len(texts):
            raise BackendUnavailable(
                f"asked for {len(texts)} embeddings, got {len(vectors)}"
            )
        out = []
        for vec in vectors:
            ev = EmbeddingVector(np.asarray(vec, dtype=np.float32))
            if ev.dimension != self.dimension:
                raise DimensionMismatch(self.dimension, ev.dimension)
            out.append(ev)
        return out


class FixtureEmbeddingBackend:
    """Replays embeddings recorded to a JSONL file; unknown text is an error."""

    def __init__(self, path: str | Path, backend_id: str = "fixture", dimension: int | None = None):
        self.backend_id = backend_id
        self._table: dict[str, EmbeddingVector] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                self._table[record["text"]] = EmbeddingVector(
                    np.asarray(record["vector"], dtype=np.float32)
                )
        if not self._table:
            raise BackendUnavailable(f"no embeddings recorded in {path}")
        dims = {v.dimension for v in self._table.values()}
        if len(dims) != 1:
            raise MalformedIndexFile(f"fixture mixes dimensions {sorted(dims)}")
        self.dimension = dimension or dims.pop()

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            if text not in self._table:
                raise BackendUnavailable(f"no recorded embedding for text {text[:60]!r}")
            out.append(self._table[text])
        return out


class HashEmbeddingBackend:
    """Deterministic offline stand-in: text hashes to a seeded unit vector.

    Carries no semantics, but is stable across runs and platforms, which
    is all the replayed benchmark and the retrieval tests need.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, backend_id: str | None = None):
        self.dimension = dimension
        self.backend_id = backend_id or f"hash-{dimension}"

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> EmbeddingVector:
        digest = hashlib.blake2b(
            f"{self.backend_id}\x00{text}".encode("utf-8"), digest_size=8
        ).digest()
        seed = int.from_bytes(digest, "little")
        rng = np.random.Generator(np.random.PCG64(seed))
        vec = rng.standard_normal(self.dimension)
        vec = vec / np.linalg.norm(vec)
        return EmbeddingVector(vec.astype(np.float32))


@dataclass(frozen=True)
class VectorIndex:
    backend_id: str
    entry_ids: tuple[str, ...]
    matrix: np.ndarray  # (count, dimension) float32

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.entry_ids)

    def vector_for(self, position: int) -> EmbeddingVector:
        return EmbeddingVector(self.matrix[position])


def build_index(
    ids_and_texts: Sequence[tuple[str, str]], backend: EmbeddingBackend
) -> VectorIndex:
    """Embed (id, text) pairs in input order into an index."""
    if not ids_and_texts:
        raise EmptyCorpus("nothing to index")
    ids = [i for i, _ in ids_and_texts]
    if len(set(ids)) != len(ids):
        raise VectorError("duplicate ids in index input")
    vectors = backend.embed_batch([t for _, t in ids_and_texts])
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(vectors[0].dimension, dims.difference({vectors[0].dimension}).pop())
    matrix = np.stack([v.values for v in vectors]).astype(np.float32)
    matrix.setflags(write=False)
    return VectorIndex(backend_id=backend.backend_id, entry_ids=tuple(ids), matrix=matrix)


def save_index(index: VectorIndex, path: str | Path) -> None:
    header = f"{INDEX_MAGIC} {INDEX_VERSION} {index.backend_id} {index.dimension} {len(index)}\n"
    if any(("\t" in i or "\n" in i) for i in index.entry_ids):
        raise VectorError("entry ids must not contain tabs or newlines")
    if " " in index.backend_id:
        raise VectorError("backend id must not contain spaces")
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(("\t".join(index.entry_ids) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())


def load_index(path: str | Path) -> VectorIndex:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8").rstrip("\n")
        parts = header.split(" ")
        if len(parts) != 5 or parts[0] != INDEX_MAGIC or parts[1] != INDEX_VERSION:
            raise MalformedIndexFile(f"bad header: {header!r}")
        backend_id = parts[2]
        try:
            dimension, count = int(parts[3]), int(parts[4])
        except ValueError:
            raise MalformedIndexFile(f"bad header numbers: {header!r}") from None
        if dimension < 1 or count < 1:
            raise MalformedIndexFile(f"bad header numbers: {header!r}")
        ids_line = fh.readline().decode("utf-8").rstrip("\n")
        entry_ids = tuple(ids_line.split("\t")) if ids_line else ()
        if len(entry_ids) != count:
            raise MalformedIndexFile(
                f"header promises {count} entries, id line carries {len(entry_ids)}"
            )
        payload = fh.read()
    expected_bytes = count * dimension * 4
    if len(payload) != expected_bytes:
        raise MalformedIndexFile(
            f"payload is {len(payload)} bytes, expected {expected_bytes}"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dimension).copy()
    matrix.setflags(write=False)
    return VectorIndex(backend_id=backend_id, entry_ids=entry_ids, matrix=matrix)


def top_k(index: VectorIndex, query: EmbeddingVector, k: int) -> list[tuple[str, float]]:
    """The k nearest entries by pairwise cosine.

    Scores every entry with `cosine` (no vectorized shortcut: results
    must equal the pairwise oracle bit for bit), sorts by similarity
    descending with entry id as the tie break, and returns min(k, n)
    (entry_id, similarity) pairs.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if query.dimension != index.dimension:
        raise DimensionMismatch(index.dimension, query.dimension)
    scored = [
        (entry_id, cosine(index.vector_for(pos), query))
        for pos, entry_id in enumerate(index.entry_ids)
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[: min(k, len(scored))]
