"""Stage orchestration: stores, run manifests, and incremental recomputation.

Each stage records a manifest with digests of everything it consumed. A stage
whose recorded inputs still match the current state is skipped; a stage whose
predecessor was never run, lost its outputs, or no longer matches its own
recorded inputs fails with a dependency error naming that predecessor. All
outputs are written to temp files and promoted atomically.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cluster import ClusteringResult, records_digest, run_clustering
from .config import ConfigurationError, PipelineConfig
from .corpus import (Chunk, Decision, chunk_decision, corpus_stats, load_corpus,
                     render_stats_text, stats_rows)
from .enrich import Record, RecordStore, build_records, embed_records
from .evaluate import (ScoreValidationError, build_report, import_human_scores,
                       judge, render_report_text, report_to_dict)
from .gateway import Gateway, get_template, template_digests
from .generate import (Commentary, SectionDraft, generate_headline,
                       generate_section, merge_commentary, merge_prompt_bindings,
                       render_with_footnotes, verify_citations)
from .live_backend import LiveBackend, MissingCredentialsError, check_credentials
from .mock_backend import MockBackend
from .provisions import ProvisionRef, ProvisionRegistry
from .storage import (atomic_write_text, canonical_json, digest_tree,
                      read_json, read_jsonl, sha256_file, sha256_text,
                      write_json, write_jsonl)

logger = logging.getLogger(__name__)

STAGES = ("ingest", "chunk", "stats", "enrich", "cluster", "generate", "evaluate")

# Ancestor chains, earliest first; a stage checks the whole chain so the
# dependency error names the first stage that is missing or stale.
_STAGE_DEPS = {
    "ingest": (),
    "chunk": ("ingest",),
    "stats": ("ingest", "chunk"),
    "enrich": ("ingest", "chunk"),
    "cluster": ("ingest", "chunk", "enrich"),
    "generate": ("ingest", "chunk", "enrich", "cluster"),
    "evaluate": ("ingest", "chunk", "enrich", "cluster", "generate"),
}


class StageDependencyError(RuntimeError):
    """A required predecessor stage is missing or stale."""

    def __init__(self, stage: str, reason: str):
        self.stage = stage
        super().__init__(f"stage {stage!r} {reason}; run it first")


@dataclass
class StageResult:
    stage: str
    recomputed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def summary(self) -> str:
        if not self.recomputed:
            return f"{self.stage}: up to date ({len(self.skipped)} unit(s) skipped)"
        return (f"{self.stage}: recomputed {len(self.recomputed)} unit(s), "
                f"skipped {len(self.skipped)}")


class Stores:
    """Canonical layout of the pipeline store directory."""

    def __init__(self, store_dir: Path):
        self.root = Path(store_dir)

    @property
    def decisions_file(self) -> Path:
        return self.root / "corpus" / "decisions.jsonl"

    @property
    def chunks_file(self) -> Path:
        return self.root / "chunks" / "chunks.jsonl"

    @property
    def records_dir(self) -> Path:
        return self.root / "records"

    @property
    def clusters_dir(self) -> Path:
        return self.root / "clusters"

    @property
    def commentaries_dir(self) -> Path:
        return self.root / "commentaries"

    @property
    def citations_dir(self) -> Path:
        return self.root / "citations"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def stats_dir(self) -> Path:
        return self.root / "stats"

    @property
    def archive_dir(self) -> Path:
        return self.root / "archive"

    def manifest_path(self, stage: str) -> Path:
        return self.root / "manifests" / f"{stage}.json"

    def commentary_paths(self, provision: ProvisionRef, model_slug: str
                         ) -> tuple[Path, Path]:
        stem = f"{provision.slug()}__{model_slug}"
        return (self.commentaries_dir / f"{stem}.json",
                self.commentaries_dir / f"{stem}.txt")

    def citation_report_path(self, provision: ProvisionRef, model_slug: str) -> Path:
        return self.citations_dir / f"{provision.slug()}__{model_slug}.json"


def make_gateway(config: PipelineConfig) -> Gateway:
    if config.backend == "mock":
        backend = MockBackend(config.seed)
        cache_dir = config.cache_dir / f"mock-{config.seed}"
    else:
        providers = {m.provider for m in config.generator_models}
        providers |= {config.summarizer_model.provider,
                      config.embedding_model.provider,
                      config.judge_model.provider}
        try:
            check_credentials(providers)
        except MissingCredentialsError as exc:
            raise ConfigurationError(str(exc)) from exc
        backend = LiveBackend()
        cache_dir = config.cache_dir / "live"
    return Gateway(backend, cache_dir)


_PATH_KEYS = ("corpus_dir", "store_dir", "cache_dir", "registry_file",
              "human_scores_file")


def run_id_for(config: PipelineConfig) -> str:
    """Stable id for deterministic (mock) runs, fresh otherwise.

    Workspace paths are excluded so the same corpus and settings yield the
    same id regardless of where the stores live.
    """
    if config.backend == "mock":
        snapshot = {k: v for k, v in config.to_dict().items()
                    if k not in _PATH_KEYS}
        return sha256_text(canonical_json(snapshot))[:12]
    return uuid.uuid4().hex[:12]


def _load_registry(config: PipelineConfig) -> ProvisionRegistry:
    if not config.registry_file.exists():
        raise ConfigurationError(f"registry file not found: {config.registry_file}")
    return ProvisionRegistry.from_file(config.registry_file)


# --- manifests -----------------------------------------------------------------


def _write_manifest(stores: Stores, stage: str, config: PipelineConfig,
                    inputs: dict, outputs: dict | None = None) -> None:
    # Mock runs are contractually deterministic, so their manifests carry no
    # wall-clock timestamp; live runs record one.
    timestamp = (None if config.backend == "mock"
                 else datetime.now(timezone.utc).isoformat())
    write_json(stores.manifest_path(stage), {
        "stage": stage,
        "run_id": run_id_for(config),
        "version": __version__,
        "backend": config.backend,
        "seed": config.seed,
        "config": config.to_dict(),
        "decoding_params": {},  # provider defaults throughout
        "templates": template_digests(),
        "inputs": inputs,
        "outputs": outputs or {},
        "timestamp": timestamp,
    })


def _read_manifest(stores: Stores, stage: str) -> dict | None:
    path = stores.manifest_path(stage)
    if not path.exists():
        return None
    return read_json(path)


def _config_digest(config: PipelineConfig, keys: tuple[str, ...]) -> str:
    snapshot = {k: v for k, v in config.to_dict().items() if k in keys}
    return sha256_text(canonical_json(snapshot))


def _require_fresh(stores: Stores, stage: str, config: PipelineConfig) -> None:
    """Raise unless every ancestor of the stage ran and its inputs still hold."""
    for ancestor in (*_STAGE_DEPS[stage], stage):
        manifest = _read_manifest(stores, ancestor)
        if manifest is None:
            raise StageDependencyError(ancestor, "has not been run")
        for relpath in manifest.get("outputs", {}):
            if not (stores.root / relpath).exists():
                raise StageDependencyError(ancestor, f"output {relpath} is missing")
        current = _stage_inputs(ancestor, stores, config)
        if current != manifest.get("inputs"):
            raise StageDependencyError(ancestor, "is stale (its inputs changed)")


def _stage_inputs(stage: str, stores: Stores, config: PipelineConfig) -> dict:
    """Digests of everything a stage's outputs depend on."""
    if stage == "ingest":
        return {
            "corpus_dir": digest_tree(config.corpus_dir, "*.json"),
            "registry": sha256_file(config.registry_file),
        }
    if stage == "chunk":
        return {
            "decisions": sha256_file(stores.decisions_file),
            "config": _config_digest(config, ("min_chunk_chars",)),
        }
    if stage == "stats":
        return {
            "decisions": sha256_file(stores.decisions_file),
            "chunks": sha256_file(stores.chunks_file),
            "registry": sha256_file(config.registry_file),
        }
    if stage == "enrich":
        return {
            "chunks": sha256_file(stores.chunks_file),
            "registry": sha256_file(config.registry_file),
            "config": _config_digest(config, ("provisions", "summarizer_model",
                                              "embedding_model", "backend", "seed",
                                              "prompt_language")),
        }
    if stage == "cluster":
        inputs = {"config": _config_digest(config, ("cluster",))}
        for provision in config.provisions:
            path = stores.records_dir / f"{provision.slug()}.jsonl"
            inputs[f"records/{provision.slug()}"] = (sha256_file(path)
                                                     if path.exists() else "")
        return inputs
    if stage == "generate":
        return {
            "clusters": digest_tree(stores.clusters_dir),
            "records": digest_tree(stores.records_dir),
            "templates": sha256_text(canonical_json(template_digests())),
            "config": _config_digest(config, ("generator_models", "summarizer_model",
                                              "backend", "seed", "prompt_language")),
        }
    if stage == "evaluate":
        human = (sha256_file(config.human_scores_file)
                 if config.human_scores_file and config.human_scores_file.exists()
                 else "")
        return {
            "commentaries": digest_tree(stores.commentaries_dir),
            "human_scores": human,
            "config": _config_digest(config, ("judge_model", "backend", "seed",
                                              "prompt_language")),
        }
    raise ValueError(f"unknown stage {stage!r}")


def _stage_skippable(stores: Stores, stage: str, config: PipelineConfig,
                     inputs: dict) -> bool:
    manifest = _read_manifest(stores, stage)
    if manifest is None or manifest.get("inputs") != inputs:
        return False
    return all((stores.root / relpath).exists()
               for relpath in manifest.get("outputs", {}))


def _output_digests(stores: Stores, paths: list[Path]) -> dict:
    return {str(p.relative_to(stores.root)): sha256_file(p) for p in paths}


# --- stages --------------------------------------------------------------------


def cmd_ingest(config: PipelineConfig) -> StageResult:
    stores = Stores(config.store_dir)
    registry = _load_registry(config)
    if not config.corpus_dir.is_dir():
        raise ConfigurationError(f"corpus directory not found: {config.corpus_dir}")
    inputs = _stage_inputs("ingest", stores, config)
    if _stage_skippable(stores, "ingest", config, inputs):
        return StageResult("ingest", skipped=["corpus"])
    decisions = load_corpus(config.corpus_dir, registry)
    write_jsonl(stores.decisions_file, [d.to_dict() for d in decisions])
    _write_manifest(stores, "ingest", config, inputs,
                    _output_digests(stores, [stores.decisions_file]))
    return StageResult("ingest", recomputed=["corpus"])


def _load_decisions(stores: Stores) -> list[Decision]:
    return [Decision.from_dict(row) for row in read_jsonl(stores.decisions_file)]


def _load_chunks(stores: Stores) -> list[Chunk]:
    return [Chunk.from_dict(row) for row in read_jsonl(stores.chunks_file)]


def cmd_chunk(config: PipelineConfig) -> StageResult:
    stores = Stores(config.store_dir)
    _require_fresh(stores, "ingest", config)
    inputs = _stage_inputs("chunk", stores, config)
    if _stage_skippable(stores, "chunk", config, inputs):
        return StageResult("chunk", skipped=["chunks"])
    chunks = []
    for decision in _load_decisions(stores):
        chunks.extend(chunk_decision(decision, config.min_chunk_chars))
    write_jsonl(stores.chunks_file, [c.to_dict() for c in chunks])
    _write_manifest(stores, "chunk", config, inputs,
                    _output_digests(stores, [stores.chunks_file]))
    return StageResult("chunk", recomputed=["chunks"])


def cmd_stats(config: PipelineConfig) -> StageResult:
    stores = Stores(config.store_dir)
    _require_fresh(stores, "ingest", config)
    _require_fresh(stores, "chunk", config)
    registry = _load_registry(config)
    inputs = _stage_inputs("stats", stores, config)
    if _stage_skippable(stores, "stats", config, inputs):
        return StageResult("stats", skipped=["stats"])
    stats = corpus_stats(_load_decisions(stores), _load_chunks(stores), registry)
    json_path = stores.stats_dir / "corpus_stats.json"
    text_path = stores.stats_dir / "corpus_stats.txt"
    write_json(json_path, {
        "n_decisions": stats.n_decisions,
        "mean_citations_per_provision": stats.mean_citations_per_provision,
        "median_citations_per_provision": stats.median_citations_per_provision,
        "per_provision": stats_rows(stats),
    })
    atomic_write_text(text_path, render_stats_text(stats))
    _write_manifest(stores, "stats", config, inputs,
                    _output_digests(stores, [json_path, text_path]))
    return StageResult("stats", recomputed=["stats"])


def cmd_enrich(config: PipelineConfig, gateway: Gateway | None = None) -> StageResult:
    stores = Stores(config.store_dir)
    _require_fresh(stores, "chunk", config)
    registry = _load_registry(config)
    inputs = _stage_inputs("enrich", stores, config)
    store = RecordStore(stores.records_dir)
    if _stage_skippable(stores, "enrich", config, inputs):
        return StageResult("enrich", skipped=[p.slug() for p in config.provisions])
    gateway = gateway or make_gateway(config)
    chunks = _load_chunks(stores)
    outputs = []
    for provision in config.provisions:
        records = build_records(chunks, provision, registry, gateway,
                                config.summarizer_model, config.seed)
        records = embed_records(records, gateway, config.embedding_model)
        store.replace_all(provision, records)
        outputs.append(store.path_for(provision))
    _write_manifest(stores, "enrich", config, inputs,
                    _output_digests(stores, [p for p in outputs if p.exists()]))
    return StageResult("enrich", recomputed=[p.slug() for p in config.provisions])


def cmd_cluster(config: PipelineConfig) -> StageResult:
    """Cluster each provision's records; unchanged provisions are skipped."""
    stores = Stores(config.store_dir)
    _require_fresh(stores, "enrich", config)
    inputs = _stage_inputs("cluster", stores, config)
    manifest = _read_manifest(stores, "cluster")
    previous = manifest.get("inputs", {}) if manifest else {}
    store = RecordStore(stores.records_dir)
    result = StageResult("cluster")
    outputs = []
    for provision in config.provisions:
        slug = provision.slug()
        out_path = stores.clusters_dir / f"{slug}.json"
        outputs.append(out_path)
        key = f"records/{slug}"
        if (out_path.exists() and previous.get(key) == inputs[key]
                and previous.get("config") == inputs["config"]):
            result.skipped.append(slug)
            continue
        records = [r for r in store.load(provision) if r.relevant]
        if not records:
            logger.warning("%s: no relevant records; empty clustering",
                           provision.canonical())
            clustering = ClusteringResult(provision, (), frozenset(),
                                          config.cluster_params, records_digest([]))
        else:
            clustering = run_clustering(records, config.cluster_params)
        write_json(out_path, clustering.to_dict())
        result.recomputed.append(slug)
    _write_manifest(stores, "cluster", config, inputs,
                    _output_digests(stores, [p for p in outputs if p.exists()]))
    return result


def _load_clustering(stores: Stores, provision: ProvisionRef) -> ClusteringResult:
    return ClusteringResult.from_dict(
        read_json(stores.clusters_dir / f"{provision.slug()}.json"))


def cmd_generate(config: PipelineConfig, gateway: Gateway | None = None) -> StageResult:
    stores = Stores(config.store_dir)
    _require_fresh(stores, "cluster", config)
    registry = _load_registry(config)
    inputs = _stage_inputs("generate", stores, config)
    if _stage_skippable(stores, "generate", config, inputs):
        return StageResult("generate", skipped=[p.slug() for p in config.provisions])
    gateway = gateway or make_gateway(config)
    store = RecordStore(stores.records_dir)
    index = store.index()
    manifest_ref = run_id_for(config)
    result = StageResult("generate")
    outputs: list[Path] = []
    for provision in config.provisions:
        clustering = _load_clustering(stores, provision)
        if not clustering.clusters:
            logger.warning("%s: no clusters; nothing to generate",
                           provision.canonical())
            result.skipped.append(provision.slug())
            continue
        drafts: list[SectionDraft] = []
        for cluster in clustering.clusters:
            keywords = [index[rid].keyword for rid in cluster.headline_record_ids]
            headline = generate_headline(keywords, provision, gateway,
                                         config.summarizer_model)
            summaries = [(rid, index[rid].summary)
                         for rid in sorted(cluster.member_record_ids)]
            drafts.append(generate_section(
                headline, summaries, provision, gateway, config.summarizer_model,
                cluster_index=cluster.index))
        target = registry.text_for(provision)
        for model in config.generator_models:
            commentary = merge_commentary(
                drafts, target, gateway, model,
                run_manifest_ref=manifest_ref, language=config.prompt_language)
            json_path, text_path = stores.commentary_paths(provision, model.slug())
            write_json(json_path, commentary.to_dict())
            atomic_write_text(text_path, render_with_footnotes(commentary, index))
            report = verify_citations(commentary, index)
            report_path = stores.citation_report_path(provision, model.slug())
            write_json(report_path, report.to_dict())
            archive_path = (stores.archive_dir /
                            f"{provision.slug()}__{model.slug()}.json")
            template = get_template("merge_commentary", config.prompt_language)
            write_json(archive_path, {
                "prompt": template.render(merge_prompt_bindings(drafts, target)),
                "response": commentary.text,
            })
            outputs.extend([json_path, text_path, report_path, archive_path])
        result.recomputed.append(provision.slug())
    _write_manifest(stores, "generate", config, inputs,
                    _output_digests(stores, outputs))
    return result


def load_commentaries(config: PipelineConfig) -> list[Commentary]:
    stores = Stores(config.store_dir)
    commentaries = []
    for path in sorted(stores.commentaries_dir.glob("*.json")):
        commentaries.append(Commentary.from_dict(read_json(path)))
    return commentaries


def cmd_evaluate(config: PipelineConfig, gateway: Gateway | None = None) -> StageResult:
    stores = Stores(config.store_dir)
    _require_fresh(stores, "generate", config)
    inputs = _stage_inputs("evaluate", stores, config)
    if _stage_skippable(stores, "evaluate", config, inputs):
        return StageResult("evaluate", skipped=["report"])
    gateway = gateway or make_gateway(config)
    scores = []
    errors = []
    for commentary in load_commentaries(config):
        try:
            scores.append(judge(commentary, gateway, config.judge_model,
                                language=config.prompt_language))
        except ScoreValidationError as exc:
            logger.warning("judging failed for %s / %s: %s",
                           commentary.provision.canonical(), commentary.model, exc)
            errors.append({"provision": commentary.provision.canonical(),
                           "model": str(commentary.model), "error": str(exc)})
    if config.human_scores_file:
        scores.extend(import_human_scores(config.human_scores_file))
    report = build_report(scores)
    json_path = stores.reports_dir / "evaluation.json"
    text_path = stores.reports_dir / "evaluation.txt"
    payload = report_to_dict(report)
    payload["judge_errors"] = errors
    write_json(json_path, payload)
    atomic_write_text(text_path, render_report_text(report))
    _write_manifest(stores, "evaluate", config, inputs,
                    _output_digests(stores, [json_path, text_path]))
    return StageResult("evaluate", recomputed=["report"])


def cmd_run(config: PipelineConfig) -> list[StageResult]:
    """The whole pipeline, stages in order, each incremental."""
    gateway = make_gateway(config)
    return [
        cmd_ingest(config),
        cmd_chunk(config),
        cmd_stats(config),
        cmd_enrich(config, gateway),
        cmd_cluster(config),
        cmd_generate(config, gateway),
        cmd_evaluate(config, gateway),
    ]
