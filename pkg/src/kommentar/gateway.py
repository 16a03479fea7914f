"""Uniform access to completion and embedding backends.

Responses are cached content-addressed under a digest of (operation, model,
rendered prompt, decoding params), transport failures are retried with
exponential backoff, and a semaphore bounds in-flight requests so live
backends are never hammered. Backends are duck-typed: anything with
``complete(template, bindings, rendered, model, params)`` and
``embed(text, model)`` works, which is what makes the deterministic offline
backend a drop-in replacement.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Transport-level failure; retriable."""


class ProviderRefusalError(GatewayError):
    """Permanent provider-side refusal, carrying the provider message."""


class TemplateError(GatewayError):
    """Unknown template, unbound placeholder, or binding without a placeholder."""


@dataclass(frozen=True)
class ModelId:
    provider: str
    name: str

    def __post_init__(self) -> None:
        if not self.provider or not self.name:
            raise ValueError(f"model id needs provider and name, got {self!r}")

    def __str__(self) -> str:
        return f"{self.provider}/{self.name}"

    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9._-]+", "-", self.name)

    @classmethod
    def parse(cls, text: str) -> ModelId:
        provider, sep, name = text.partition("/")
        if not sep:
            raise ValueError(f"model id must be 'provider/name', got {text!r}")
        return cls(provider, name)


PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    language: str = "de"

    def placeholders(self) -> set[str]:
        return set(PLACEHOLDER_RE.findall(self.body))

    def render(self, bindings: Mapping[str, str]) -> str:
        """Substitute {{name}} placeholders; names must match the body exactly."""
        wanted = self.placeholders()
        given = set(bindings)
        if wanted - given:
            raise TemplateError(
                f"template {self.template_id!r}: unbound placeholders "
                f"{sorted(wanted - given)}")
        if given - wanted:
            raise TemplateError(
                f"template {self.template_id!r}: bindings without placeholders "
                f"{sorted(given - wanted)}")
        return PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), self.body)


_TEMPLATE_DIR = Path(__file__).parent / "templates"


def load_templates(template_dir: Path | None = None) -> dict[tuple[str, str], PromptTemplate]:
    """Load all versioned template files, keyed by (template_id, language)."""
    template_dir = template_dir or _TEMPLATE_DIR
    templates = {}
    for path in sorted(template_dir.glob("*.txt")):
        template_id, _, language = path.stem.rpartition(".")
        if not template_id:
            template_id, language = language, "de"
        templates[(template_id, language)] = PromptTemplate(
            template_id=template_id, body=path.read_text(encoding="utf-8"),
            language=language)
    return templates


def get_template(template_id: str, language: str = "de",
                 template_dir: Path | None = None) -> PromptTemplate:
    templates = load_templates(template_dir)
    try:
        return templates[(template_id, language)]
    except KeyError:
        raise TemplateError(f"no template {template_id!r} for language {language!r}")


def template_digests(template_dir: Path | None = None) -> dict[str, str]:
    return {
        f"{tid}.{lang}": hashlib.sha256(t.body.encode("utf-8")).hexdigest()
        for (tid, lang), t in load_templates(template_dir).items()
    }


@dataclass(frozen=True)
class Embedding:
    """A fixed-dimension vector, L2-normalized when produced by the gateway."""

    vector: tuple[float, ...]
    normalized: bool = False

    @property
    def dim(self) -> int:
        return len(self.vector)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.vector))

    @classmethod
    def from_raw(cls, values) -> Embedding:
        """Normalize raw backend output to unit length; zero vectors are rejected."""
        vector = tuple(float(v) for v in values)
        norm = math.sqrt(sum(v * v for v in vector))
        if norm == 0.0:
            raise GatewayError("cannot normalize a zero embedding vector")
        return cls(tuple(v / norm for v in vector), normalized=True)

    def to_list(self) -> list[float]:
        return list(self.vector)


def request_digest(kind: str, model: ModelId, payload: str, params: Mapping | None) -> str:
    canonical = json.dumps(
        {"kind": kind, "model": str(model), "payload": payload,
         "params": dict(sorted((params or {}).items()))},
        ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response cache: one JSON file per request digest."""

    def __init__(self, cache_dir: Path | str):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["value"]

    def put(self, key: str, value) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}")
        tmp.write_text(json.dumps({"value": value}, ensure_ascii=False),
                       encoding="utf-8")
        os.replace(tmp, path)


@dataclass
class GatewayStats:
    completions: int = 0
    embeddings: int = 0
    cache_hits: int = 0
    backend_invocations: int = 0
    retries: int = 0


class Gateway:
    """Caching, retrying front door for one backend."""

    def __init__(
        self,
        backend,
        cache_dir: Path | str | None = None,
        *,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        max_in_flight: int = 8,
    ):
        self.backend = backend
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.stats = GatewayStats()
        self._limiter = threading.Semaphore(max_in_flight)
        self._lock = threading.Lock()

    def _call(self, fn):
        last: TransportError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                with self._lock:
                    self.stats.retries += 1
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                with self._limiter:
                    with self._lock:
                        self.stats.backend_invocations += 1
                    return fn()
            except TransportError as exc:
                last = exc
        raise TransportError(
            f"giving up after {self.max_attempts} attempts: {last}") from last

    def complete(
        self,
        template: PromptTemplate,
        bindings: Mapping[str, str],
        model: ModelId,
        params: Mapping | None = None,
        *,
        bypass_cache: bool = False,
    ) -> str:
        """Render the template and complete it, serving repeats from the cache."""
        rendered = template.render(bindings)
        key = request_digest("complete", model, rendered, params)
        with self._lock:
            self.stats.completions += 1
        if self.cache is not None and not bypass_cache:
            cached = self.cache.get(key)
            if cached is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return cached
        text = self._call(lambda: self.backend.complete(
            template, dict(bindings), rendered, model, dict(params or {})))
        if self.cache is not None:
            self.cache.put(key, text)
        return text

    def embed(self, texts: list[str], model: ModelId) -> list[Embedding]:
        """One L2-normalized embedding per input text, cached per (model, text)."""
        if not texts:
            raise GatewayError("embed requires at least one text")
        out: list[Embedding] = []
        for text in texts:
            if not text:
                raise GatewayError("cannot embed an empty text")
            key = request_digest("embed", model, text, None)
            with self._lock:
                self.stats.embeddings += 1
            raw = self.cache.get(key) if self.cache is not None else None
            if raw is not None:
                with self._lock:
                    self.stats.cache_hits += 1
            else:
                raw = self._call(lambda t=text: self.backend.embed(t, model))
                raw = [float(v) for v in raw]
                if self.cache is not None:
                    self.cache.put(key, raw)
            out.append(Embedding.from_raw(raw))
        dims = {e.dim for e in out}
        if len(dims) > 1:
            raise GatewayError(f"backend returned mixed embedding dims: {sorted(dims)}")
        return out
