"""Run configuration.

One YAML file read once at startup; every section has working defaults
so a missing file still yields a usable offline configuration. The LLM
token never lives here: it comes from the NL2API_LLM_TOKEN environment
variable only.

Relative paths inside the file resolve against the file's own
directory, so a checked-in config keeps working from any working
directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from nl2api.errors import Nl2ApiError
from nl2api.executor import DEFAULT_GRAPHQL_URL, DEFAULT_REST_BASE
from nl2api.vectors import DEFAULT_DIMENSION, DEFAULT_EMBEDDING_MODEL

RUN_MODES = ("live", "cassette", "record")
EMBEDDING_MODES = ("live", "fixture", "hash")


class ConfigError(Nl2ApiError):
    pass


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str | None = None
    models: tuple[str, ...] = ("Llama3-8B", "Mixtral-8x7B-instruct", "Codestral-22B")
    cassette: str | None = None
    timeout_s: float = 60.0
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass(frozen=True)
class EmbeddingConfig:
    # Offline-deterministic by default; live embedding is an explicit
    # choice that needs an endpoint.
    mode: str = "hash"
    endpoint: str | None = None
    model: str = DEFAULT_EMBEDDING_MODEL
    dimension: int = DEFAULT_DIMENSION
    fixture: str | None = None


@dataclass(frozen=True)
class ApiConfig:
    rest_base: str = DEFAULT_REST_BASE
    graphql_url: str = DEFAULT_GRAPHQL_URL
    cassette: str | None = None
    rate_per_s: float = 2.0
    timeout_s: float = 30.0


@dataclass(frozen=True)
class RagConfig:
    k: int = 5
    retrieve_from: str = "dev"  # dev | all


@dataclass(frozen=True)
class RunSettings:
    mode: str = "cassette"
    seed: int = 7
    test_fraction: float = 0.8
    strategies: tuple[str, ...] = ("prompt_engineering", "rag", "agentic")
    dialects: tuple[str, ...] = ("REST", "GRAPHQL")


@dataclass(frozen=True)
class PathsConfig:
    corpus: str | None = None
    vocabulary: str | None = None
    schema_context: str | None = None
    templates: str | None = None
    index: str | None = None
    out_dir: str = "runs"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origins: tuple[str, ...] = ()
    result_cap: int = 100


@dataclass(frozen=True)
class Config:
    llm: LlmConfig = field(default_factory=LlmConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    api: ApiConfig = field(default_factory=ApiConfig)
    rag: RagConfig = field(default_factory=RagConfig)
    run: RunSettings = field(default_factory=RunSettings)
    paths: PathsConfig = field(default_factory=PathsConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def public_dict(self) -> dict:
        """Everything in the config; secrets never enter it by design."""
        out: dict = {}
        for section_field in fields(self):
            section = getattr(self, section_field.name)
            out[section_field.name] = {
                f.name: _plain(getattr(section, f.name)) for f in fields(section)
            }
        return out


def _plain(value):
    if isinstance(value, tuple):
        return list(value)
    return value


_SECTIONS = {
    "llm": LlmConfig,
    "embedding": EmbeddingConfig,
    "api": ApiConfig,
    "rag": RagConfig,
    "run": RunSettings,
    "paths": PathsConfig,
    "service": ServiceConfig,
}

_PATH_FIELDS = {
    ("llm", "cassette"),
    ("embedding", "fixture"),
    ("api", "cassette"),
    ("paths", "corpus"),
    ("paths", "vocabulary"),
    ("paths", "schema_context"),
    ("paths", "templates"),
    ("paths", "index"),
    ("paths", "out_dir"),
}


def load_config(path: str | Path | None = None) -> Config:
    """Defaults overlaid with the YAML file at `path`, validated."""
    config = Config()
    if path is None:
        return config
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    base_dir = path.resolve().parent
    for section_name, values in data.items():
        cls = _SECTIONS.get(section_name)
        if cls is None:
            raise ConfigError(f"unknown config section {section_name!r}")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"section {section_name!r} must be a mapping")
        section = getattr(config, section_name)
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown key {section_name}.{key}")
            if isinstance(value, list):
                value = tuple(str(v) for v in value)
            if (section_name, key) in _PATH_FIELDS and isinstance(value, str):
                value = str((base_dir / value).resolve()) if not Path(value).is_absolute() else value
            updates[key] = value
        config = replace(config, **{section_name: replace(section, **updates)})
    _validate(config)
    return config


def _validate(config: Config) -> None:
    if config.run.mode not in RUN_MODES:
        raise ConfigError(f"run.mode must be one of {RUN_MODES}, got {config.run.mode!r}")
    if config.embedding.mode not in EMBEDDING_MODES:
        raise ConfigError(
            f"embedding.mode must be one of {EMBEDDING_MODES}, got {config.embedding.mode!r}"
        )
    if config.rag.retrieve_from not in ("dev", "all"):
        raise ConfigError("rag.retrieve_from must be 'dev' or 'all'")
    if config.rag.k < 1:
        raise ConfigError("rag.k must be at least 1")
    if not 0.0 < config.run.test_fraction < 1.0:
        raise ConfigError("run.test_fraction must be strictly between 0 and 1")
    from nl2api.strategies import STRATEGIES

    for strategy in config.run.strategies:
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r} in run.strategies")
    for dialect in config.run.dialects:
        if dialect not in ("REST", "GRAPHQL"):
            raise ConfigError(f"unknown dialect {dialect!r} in run.dialects")
