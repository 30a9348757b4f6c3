"""Wiring: config -> loaded data and live objects.

This is the only module that knows how to turn a Config into concrete
backends; the CLI and HTTP service both build a Runtime and use it,
so their behavior cannot drift apart.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from nl2api.config import Config, ConfigError
from nl2api.corpus import (
    AttributeVocabulary,
    CorpusEntry,
    SchemaContext,
    load_corpus,
    load_schema_context,
    load_vocabulary,
    split_corpus,
)
from nl2api.errors import Nl2ApiError
from nl2api.executor import ApiCassette, ApiExecutor
from nl2api.gateway import (
    TOKEN_ENV_VAR,
    CassetteStore,
    ChatBackend,
    LiveBackend,
    RecordingBackend,
    ScriptedBackend,
)
from nl2api.strategies import GenerationDeps, TemplateSet
from nl2api.vectors import (
    EmbeddingBackend,
    FixtureEmbeddingBackend,
    HashEmbeddingBackend,
    HttpEmbeddingBackend,
    VectorIndex,
    build_index,
    load_index,
)


class CredentialsMissing(Nl2ApiError):
    pass


@dataclass
class Runtime:
    config: Config
    mode: str
    corpus: list[CorpusEntry]
    dev: list[CorpusEntry]
    test: list[CorpusEntry]
    vocabulary: AttributeVocabulary
    schema_context: SchemaContext
    templates: TemplateSet
    chat_backend: ChatBackend
    executor: ApiExecutor
    embedding_backend: EmbeddingBackend | None = None
    index: VectorIndex | None = None
    pool: dict[str, CorpusEntry] | None = None

    def generation_deps(self) -> GenerationDeps:
        return GenerationDeps(
            backend=self.chat_backend,
            templates=self.templates,
            schema_context=self.schema_context,
            vocabulary=self.vocabulary,
            index=self.index,
            pool=self.pool,
            embedding_backend=self.embedding_backend,
            rag_k=self.config.rag.k,
            temperature=self.config.llm.temperature,
            max_tokens=self.config.llm.max_tokens,
        )


def _require_path(value: str | None, what: str) -> Path:
    if not value:
        raise ConfigError(f"paths.{what} is not configured")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    return path


def build_chat_backend(config: Config, mode: str) -> ChatBackend:
    if mode == "cassette":
        if not config.llm.cassette:
            raise ConfigError("llm.cassette is required in cassette mode")
        return ScriptedBackend(CassetteStore(_require_path(config.llm.cassette, "llm cassette")))
    if not config.llm.endpoint:
        raise ConfigError("llm.endpoint is required in live/record mode")
    token = os.environ.get(TOKEN_ENV_VAR)
    if not token:
        raise CredentialsMissing(
            f"set {TOKEN_ENV_VAR} to use the live LLM endpoint (credentials never come from config)"
        )
    live = LiveBackend(config.llm.endpoint, token=token, timeout=config.llm.timeout_s)
    if mode == "record":
        if not config.llm.cassette:
            raise ConfigError("llm.cassette is required in record mode")
        return RecordingBackend(live, CassetteStore(config.llm.cassette))
    return live


def build_executor(config: Config, mode: str) -> ApiExecutor:
    cassette = None
    if mode in ("cassette", "record"):
        if not config.api.cassette:
            raise ConfigError(f"api.cassette is required in {mode} mode")
        if mode == "cassette":
            _require_path(config.api.cassette, "api cassette")
        cassette = ApiCassette(config.api.cassette)
    return ApiExecutor(
        mode=mode,
        rest_base=config.api.rest_base,
        graphql_url=config.api.graphql_url,
        cassette=cassette,
        rate_per_s=config.api.rate_per_s,
        timeout=config.api.timeout_s,
    )


def build_embedding_backend(config: Config) -> EmbeddingBackend:
    embedding = config.embedding
    if embedding.mode == "hash":
        return HashEmbeddingBackend(dimension=embedding.dimension)
    if embedding.mode == "fixture":
        if not embedding.fixture:
            raise ConfigError("embedding.fixture path is required in fixture mode")
        return FixtureEmbeddingBackend(
            _require_path(embedding.fixture, "embedding fixture"), backend_id=embedding.model
        )
    if not embedding.endpoint:
        raise ConfigError("embedding.endpoint is required in live embedding mode")
    return HttpEmbeddingBackend(
        embedding.endpoint, model=embedding.model, dimension=embedding.dimension
    )


def build_runtime(
    config: Config,
    mode: str | None = None,
    with_retrieval: bool = True,
) -> Runtime:
    """Load data files and construct backends for the requested mode.

    with_retrieval controls whether the embedding index is prepared;
    prompt-engineering-only runs skip it.
    """
    mode = mode or config.run.mode
    if mode not in ("live", "cassette", "record"):
        raise ConfigError(f"unknown mode {mode!r}")

    corpus = load_corpus(_require_path(config.paths.corpus, "corpus"))
    vocabulary = load_vocabulary(_require_path(config.paths.vocabulary, "vocabulary"))
    schema_context = load_schema_context(
        _require_path(config.paths.schema_context, "schema_context")
    )
    templates = TemplateSet.load(config.paths.templates)
    dev, test = split_corpus(corpus, config.run.test_fraction, config.run.seed)

    embedding_backend = None
    index = None
    pool_entries = None
    if with_retrieval:
        embedding_backend = build_embedding_backend(config)
        pool_entries = dev if config.rag.retrieve_from == "dev" else corpus
        if config.paths.index:
            index = load_index(_require_path(config.paths.index, "index"))
            missing = set(index.entry_ids) - {e.id for e in pool_entries}
            if missing:
                raise ConfigError(
                    f"index entries not in the example pool: {sorted(missing)[:5]}"
                )
        else:
            index = build_index(
                [(e.id, e.question) for e in pool_entries], embedding_backend
            )

    return Runtime(
        config=config,
        mode=mode,
        corpus=corpus,
        dev=dev,
        test=test,
        vocabulary=vocabulary,
        schema_context=schema_context,
        templates=templates,
        chat_backend=build_chat_backend(config, mode),
        executor=build_executor(config, mode),
        embedding_backend=embedding_backend,
        index=index,
        pool=None if pool_entries is None else {e.id: e for e in pool_entries},
    )
