"""Pipeline configuration: one declarative document, CLI flags override keys.

Environment variables are only consulted for provider credentials; everything
that affects outputs lives in the config so a run can be reproduced from its
manifest snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .cluster import ClusterParams
from .gateway import ModelId
from .provisions import ProvisionRef, parse_provision


class ConfigurationError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


DEFAULT_PROVISIONS = (
    ProvisionRef("BGB", 242),
    ProvisionRef("BGB", 280),
    ProvisionRef("BGB", 812),
    ProvisionRef("BGB", 823),
)

DEFAULT_GENERATOR_MODELS = (
    ModelId("openai", "gpt-4o"),
    ModelId("openai", "gpt-4.1"),
    ModelId("openai", "gpt-4.5-preview"),
    ModelId("openai", "o3"),
)

DEFAULT_SUMMARIZER_MODEL = ModelId("openai", "gpt-4o")
DEFAULT_EMBEDDING_MODEL = ModelId("openai", "text-embedding-3-large")
DEFAULT_JUDGE_MODEL = ModelId("google", "gemini-2.5-flash")

BACKENDS = ("mock", "live")


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: Path
    store_dir: Path
    cache_dir: Path
    registry_file: Path
    provisions: tuple[ProvisionRef, ...] = DEFAULT_PROVISIONS
    min_chunk_chars: int = 100
    cluster_params: ClusterParams = field(default_factory=ClusterParams)
    generator_models: tuple[ModelId, ...] = DEFAULT_GENERATOR_MODELS
    summarizer_model: ModelId = DEFAULT_SUMMARIZER_MODEL
    embedding_model: ModelId = DEFAULT_EMBEDDING_MODEL
    judge_model: ModelId = DEFAULT_JUDGE_MODEL
    backend: str = "mock"
    seed: int = 0
    human_scores_file: Path | None = None
    prompt_language: str = "de"

    def validate(self) -> PipelineConfig:
        if not self.provisions:
            raise ConfigurationError("provisions must be non-empty")
        if self.backend not in BACKENDS:
            raise ConfigurationError(
                f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.judge_model in self.generator_models:
            raise ConfigurationError(
                f"judge model {self.judge_model} is also a generator model; "
                "judging requires a model not used for generation")
        if self.min_chunk_chars < 1:
            raise ConfigurationError(
                f"min_chunk_chars must be >= 1, got {self.min_chunk_chars}")
        return self

    def to_dict(self) -> dict:
        return {
            "corpus_dir": str(self.corpus_dir),
            "store_dir": str(self.store_dir),
            "cache_dir": str(self.cache_dir),
            "registry_file": str(self.registry_file),
            "provisions": [p.canonical() for p in self.provisions],
            "min_chunk_chars": self.min_chunk_chars,
            "cluster": self.cluster_params.to_dict(),
            "generator_models": [str(m) for m in self.generator_models],
            "summarizer_model": str(self.summarizer_model),
            "embedding_model": str(self.embedding_model),
            "judge_model": str(self.judge_model),
            "backend": self.backend,
            "seed": self.seed,
            "human_scores_file": (str(self.human_scores_file)
                                  if self.human_scores_file else None),
            "prompt_language": self.prompt_language,
        }


def config_from_dict(data: dict, base_dir: Path | None = None) -> PipelineConfig:
    base = Path(base_dir) if base_dir else Path(".")

    def path_of(key: str, default: str | None = None) -> Path:
        value = data.get(key, default)
        if value is None:
            raise ConfigurationError(f"config key {key!r} is required")
        p = Path(value)
        return p if p.is_absolute() else base / p

    try:
        provisions = tuple(parse_provision(p) for p in
                           data.get("provisions", [p.canonical()
                                                   for p in DEFAULT_PROVISIONS]))
        generator_models = tuple(ModelId.parse(m) for m in
                                 data.get("generator_models",
                                          [str(m) for m in DEFAULT_GENERATOR_MODELS]))
        config = PipelineConfig(
            corpus_dir=path_of("corpus_dir"),
            store_dir=path_of("store_dir"),
            cache_dir=path_of("cache_dir", "cache"),
            registry_file=path_of("registry_file"),
            provisions=provisions,
            min_chunk_chars=int(data.get("min_chunk_chars", 100)),
            cluster_params=ClusterParams.from_dict(data.get("cluster", {})),
            generator_models=generator_models,
            summarizer_model=ModelId.parse(
                data.get("summarizer_model", str(DEFAULT_SUMMARIZER_MODEL))),
            embedding_model=ModelId.parse(
                data.get("embedding_model", str(DEFAULT_EMBEDDING_MODEL))),
            judge_model=ModelId.parse(
                data.get("judge_model", str(DEFAULT_JUDGE_MODEL))),
            backend=str(data.get("backend", "mock")),
            seed=int(data.get("seed", 0)),
            human_scores_file=(path_of("human_scores_file")
                               if data.get("human_scores_file") else None),
            prompt_language=str(data.get("prompt_language", "de")),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid configuration: {exc}") from exc
    return config.validate()


def load_config(path: Path | str, overrides: dict | None = None) -> PipelineConfig:
    """Read a YAML config file; overrides win over file keys."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid YAML: {exc}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must be a mapping")
    data.update(overrides or {})
    return config_from_dict(data, base_dir=path.parent)


def apply_overrides(config: PipelineConfig, *, backend: str | None = None,
                    seed: int | None = None,
                    provisions: tuple[ProvisionRef, ...] | None = None,
                    ) -> PipelineConfig:
    if backend is not None:
        config = replace(config, backend=backend)
    if seed is not None:
        config = replace(config, seed=seed)
    if provisions:
        unknown = [p.canonical() for p in provisions if p not in config.provisions]
        if unknown:
            raise ConfigurationError(
                f"provision filter not in configured provisions: {unknown}")
        config = replace(config, provisions=provisions)
    return config.validate()
