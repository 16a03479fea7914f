"""Per-chunk summaries, application-step keywords, and keyword embeddings.

Every chunk that cites a target provision yields at most one record under
that provision; the same chunk may yield records under several provisions.
A record enters clustering only when it is relevant, has a non-empty keyword,
and carries a normalized embedding.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import Chunk
from .gateway import Embedding, Gateway, ModelId, get_template
from .mock_backend import IRRELEVANCE_SENTINEL
from .provisions import ProvisionRef, ProvisionRegistry, parse_provision
from .storage import atomic_write_text

logger = logging.getLogger(__name__)

RECORD_ID_RE = re.compile(r"^[0-9a-f]{24}$")
MAX_KEYWORD_TOKENS = 12


@dataclass(frozen=True)
class Record:
    """The clustering unit: keyword, summary, and keyword embedding for one
    (provision, chunk) pair, addressable by a 24-hex-digit record id."""

    record_id: str
    provision: ProvisionRef
    decision_id: str
    ordinal: int
    summary: str
    keyword: str
    embedding: Embedding | None
    relevant: bool

    def __post_init__(self) -> None:
        if not RECORD_ID_RE.match(self.record_id):
            raise ValueError(f"record_id must be 24 hex chars, got {self.record_id!r}")
        if self.relevant and not self.keyword:
            raise ValueError(f"relevant record {self.record_id} has empty keyword")
        if not self.relevant and (self.keyword or self.embedding is not None):
            raise ValueError(f"irrelevant record {self.record_id} must carry "
                             "neither keyword nor embedding")

    @property
    def chunk_id(self) -> tuple[str, int]:
        return (self.decision_id, self.ordinal)

    def object_id(self) -> str:
        return f"ObjectId('{self.record_id}')"

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "provision": self.provision.canonical(),
            "decision_id": self.decision_id,
            "ordinal": self.ordinal,
            "summary": self.summary,
            "keyword": self.keyword,
            "embedding": None if self.embedding is None else {
                "vector": self.embedding.to_list(),
                "dim": self.embedding.dim,
                "normalized": self.embedding.normalized,
            },
            "relevant": self.relevant,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Record:
        raw = data.get("embedding")
        embedding = None
        if raw is not None:
            embedding = Embedding(tuple(float(v) for v in raw["vector"]),
                                  normalized=bool(raw.get("normalized", False)))
        return cls(
            record_id=data["record_id"],
            provision=parse_provision(data["provision"]),
            decision_id=data["decision_id"],
            ordinal=int(data["ordinal"]),
            summary=data["summary"],
            keyword=data["keyword"],
            embedding=embedding,
            relevant=bool(data["relevant"]),
        )


def make_record_id(seed: int, provision: ProvisionRef, decision_id: str,
                   ordinal: int) -> str:
    """Deterministic 24-hex record id for a (provision, chunk) pair.

    Derived from a digest rather than fresh randomness so that re-running a
    stage with the same seed reproduces the same ids bit-for-bit and partial
    recomputation never shifts ids of untouched records.
    """
    payload = f"{seed}:{provision.canonical()}:{decision_id}:{ordinal}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:24]


def _provision_block(registry: ProvisionRegistry, refs: list[ProvisionRef]) -> str:
    blocks = []
    for ref in sorted(set(r.base() for r in refs), key=ProvisionRef.sort_key):
        entry = registry.text_for(ref)
        heading = f" {entry.heading}" if entry.heading else ""
        blocks.append(f"{entry.ref.canonical()}{heading}\n{entry.body}")
    return "\n\n".join(blocks)


def summarize_chunk(
    chunk: Chunk,
    target: ProvisionRef,
    registry: ProvisionRegistry,
    gateway: Gateway,
    model: ModelId,
    *,
    sentinel: str = IRRELEVANCE_SENTINEL,
) -> tuple[str, bool]:
    """Summarize how the chunk applies the target provision.

    The prompt carries the statutory texts of every provision the chunk
    cites, so the model can tell whether the paragraph actually deals with
    the target. An exact sentinel reply marks the chunk irrelevant.
    """
    if not any(c.base() == target.base() for c in chunk.citations):
        raise ValueError(f"chunk {chunk.chunk_id} does not cite {target.canonical()}")
    template = get_template("summarize")
    summary = gateway.complete(template, {
        "provision_ref": target.canonical(),
        "provision_texts": _provision_block(registry, sorted(chunk.citations,
                                                             key=ProvisionRef.sort_key)),
        "irrelevance_sentinel": sentinel,
        "chunk": chunk.text,
    }, model)
    if summary.strip() == sentinel:
        return "", False
    return summary.strip(), True


def _truncate_keyword(text: str, max_tokens: int = MAX_KEYWORD_TOKENS) -> str:
    """Clamp to max_tokens, preferring to cut at a comma or semicolon."""
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return " ".join(tokens)
    kept = tokens[:max_tokens]
    for i in range(len(kept) - 1, 0, -1):
        if kept[i - 1].endswith((",", ";")):
            kept = kept[:i]
            break
    return " ".join(kept).rstrip(",;")


def extract_keyword(
    summary: str,
    target: ProvisionRef,
    registry: ProvisionRegistry,
    gateway: Gateway,
    model: ModelId,
) -> str:
    """One short keyword phrase for a summary; empty when the model yields none."""
    if not summary:
        raise ValueError("cannot extract a keyword from an empty summary")
    template = get_template("keyword")
    entry = registry.text_for(target)
    bindings = {
        "provision_ref": target.canonical(),
        "provision_text": entry.body,
        "summary": summary,
    }
    keyword = gateway.complete(template, bindings, model).strip()
    if not keyword:
        keyword = gateway.complete(template, bindings, model, bypass_cache=True).strip()
    return _truncate_keyword(keyword)


def build_records(
    chunks: list[Chunk],
    target: ProvisionRef,
    registry: ProvisionRegistry,
    gateway: Gateway,
    model: ModelId,
    seed: int,
) -> list[Record]:
    """Summaries and keywords for every chunk citing the target provision.

    Chunks whose summary comes back as the irrelevance sentinel, or whose
    keyword extraction yields nothing even after a retry, are kept as
    irrelevant records so downstream stages can account for them.
    """
    records: list[Record] = []
    for chunk in sorted(chunks, key=lambda c: c.chunk_id):
        if not any(c.base() == target.base() for c in chunk.citations):
            continue
        record_id = make_record_id(seed, target, chunk.decision_id, chunk.ordinal)
        summary, relevant = summarize_chunk(chunk, target, registry, gateway, model)
        keyword = ""
        if relevant:
            keyword = extract_keyword(summary, target, registry, gateway, model)
            if not keyword:
                logger.warning("no keyword for record %s; marking irrelevant", record_id)
                relevant = False
        if not relevant:
            records.append(Record(record_id, target, chunk.decision_id, chunk.ordinal,
                                  summary="", keyword="", embedding=None,
                                  relevant=False))
        else:
            records.append(Record(record_id, target, chunk.decision_id, chunk.ordinal,
                                  summary=summary, keyword=keyword, embedding=None,
                                  relevant=True))
    return records


def embed_records(records: list[Record], gateway: Gateway,
                  model: ModelId) -> list[Record]:
    """Attach keyword embeddings; identical keywords share identical vectors."""
    out: list[Record] = []
    for record in records:
        if not record.relevant:
            out.append(record)
            continue
        if not record.keyword:
            logger.warning("record %s is relevant but has no keyword; skipping",
                           record.record_id)
            continue
        embedding = gateway.embed([record.keyword], model)[0]
        out.append(replace(record, embedding=embedding))
    return out


class RecordStore:
    """Append-only record files, one JSON line per record, keyed by provision."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def path_for(self, provision: ProvisionRef) -> Path:
        return self.root / f"{provision.slug()}.jsonl"

    def write(self, provision: ProvisionRef, records: list[Record]) -> None:
        existing = {r.record_id for r in self.load(provision)}
        clashes = existing & {r.record_id for r in records}
        if clashes:
            raise ValueError(f"record ids already stored: {sorted(clashes)[:3]}")
        self.root.mkdir(parents=True, exist_ok=True)
        with self.path_for(provision).open("a", encoding="utf-8") as fh:
            for record in sorted(records, key=lambda r: r.record_id):
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")

    def replace_all(self, provision: ProvisionRef, records: list[Record]) -> None:
        ids = [r.record_id for r in records]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate record ids in one batch")
        content = "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n"
                          for r in sorted(records, key=lambda r: r.record_id))
        atomic_write_text(self.path_for(provision), content)

    def load(self, provision: ProvisionRef) -> list[Record]:
        path = self.path_for(provision)
        if not path.exists():
            return []
        records = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(Record.from_dict(json.loads(line)))
        return records

    def provisions(self) -> list[ProvisionRef]:
        refs = []
        for path in sorted(self.root.glob("*.jsonl")):
            parts = path.stem.split("_")
            refs.append(ProvisionRef(parts[0], int(parts[1]),
                                     int(parts[2]) if len(parts) > 2 else None))
        return refs

    def index(self) -> dict[str, Record]:
        """record_id -> Record over the whole store, asserting global uniqueness."""
        seen: dict[str, Record] = {}
        for provision in self.provisions():
            for record in self.load(provision):
                if record.record_id in seen:
                    raise ValueError(f"duplicate record id {record.record_id}")
                seen[record.record_id] = record
        return seen
