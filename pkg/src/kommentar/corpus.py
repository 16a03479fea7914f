"""Decision ingestion, reasons-section extraction, chunking, and corpus statistics."""

from __future__ import annotations

import json
import re
import statistics
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .citations import detect_citations
from .provisions import ProvisionRef, ProvisionRegistry


class IngestError(ValueError):
    """Malformed or duplicate decision document."""


# Reasons-section markers, tried in order; matched only at heading positions:
# start of line, the marker word, an optional colon. A bare marker line
# introduces the section; text after the colon on the same line belongs to it.
DEFAULT_REASONS_MARKERS = ("Entscheidungsgründe", "Gründe")

# Top-level headings that terminate the reasons section before end-of-document.
DEFAULT_REASONS_TERMINATORS = ("Rechtsmittelbelehrung", "Rechtsbehelfsbelehrung")


@dataclass(frozen=True)
class Decision:
    """One court ruling with detected provision citations."""

    decision_id: str
    court: str
    decided_on: date
    full_text: str
    reasons: str | None
    citations: frozenset[ProvisionRef]

    def to_dict(self) -> dict:
        return {
            "decision_id": self.decision_id,
            "court": self.court,
            "decided_on": self.decided_on.isoformat(),
            "full_text": self.full_text,
            "reasons": self.reasons,
            "citations": sorted(c.canonical() for c in self.citations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Decision:
        from .provisions import parse_provision

        return cls(
            decision_id=data["decision_id"],
            court=data["court"],
            decided_on=date.fromisoformat(data["decided_on"]),
            full_text=data["full_text"],
            reasons=data.get("reasons"),
            citations=frozenset(parse_provision(c) for c in data.get("citations", [])),
        )


@dataclass(frozen=True)
class Chunk:
    """One surviving paragraph of a reasons section."""

    decision_id: str
    ordinal: int
    text: str
    citations: frozenset[ProvisionRef] = field(default_factory=frozenset)

    @property
    def chunk_id(self) -> tuple[str, int]:
        return (self.decision_id, self.ordinal)

    @property
    def char_len(self) -> int:
        return len(self.text)

    def to_dict(self) -> dict:
        return {
            "decision_id": self.decision_id,
            "ordinal": self.ordinal,
            "text": self.text,
            "char_len": self.char_len,
            "citations": sorted(c.canonical() for c in self.citations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Chunk:
        from .provisions import parse_provision

        return cls(
            decision_id=data["decision_id"],
            ordinal=int(data["ordinal"]),
            text=data["text"],
            citations=frozenset(parse_provision(c) for c in data.get("citations", [])),
        )


def _heading_re(marker: str) -> re.Pattern[str]:
    # A heading line is the marker alone (optionally with a colon), or the
    # marker followed by a colon and inline content.
    return re.compile(rf"^[ \t]*{re.escape(marker)}[ \t]*(?::[ \t]*(?P<inline>.*))?$",
                      re.MULTILINE)


def extract_reasons(
    full_text: str,
    markers: tuple[str, ...] = DEFAULT_REASONS_MARKERS,
    terminators: tuple[str, ...] = DEFAULT_REASONS_TERMINATORS,
) -> str | None:
    """The span after the first reasons heading, up to the next top-level heading.

    Markers are tried in the configured order; for the first marker that
    occurs at a heading position anywhere in the document, its first
    occurrence wins. Returns None when no marker matches.
    """
    for marker in markers:
        m = _heading_re(marker).search(full_text)
        if m is None:
            continue
        span = (m.group("inline") or "") + full_text[m.end():]
        end = len(span)
        for terminator in terminators:
            t = _heading_re(terminator).search(span)
            if t is not None:
                end = min(end, t.start())
        return span[:end].strip("\n")
    return None


def split_paragraphs(text: str) -> list[str]:
    """Paragraphs split on one or more blank lines, each trimmed, empties dropped."""
    normalized = text.replace("\r\n", "\n").replace("\r", "\n")
    parts = re.split(r"\n[ \t]*\n+", normalized)
    return [p.strip() for p in parts if p.strip()]


def chunk_reasons(
    reasons: str,
    min_chars: int = 100,
    *,
    decision_id: str = "",
    citations: frozenset[ProvisionRef] = frozenset(),
) -> list[Chunk]:
    """Paragraph-level chunks of a reasons section, in document order.

    Paragraphs shorter than min_chars (after trimming) are filtered out;
    a paragraph of exactly min_chars is kept. Ordinals number the surviving
    chunks contiguously from 0.
    """
    if min_chars < 1:
        raise ValueError(f"min_chars must be >= 1, got {min_chars}")
    chunks = []
    for paragraph in split_paragraphs(reasons):
        if len(paragraph) < min_chars:
            continue
        chunks.append(Chunk(decision_id=decision_id, ordinal=len(chunks),
                            text=paragraph, citations=citations))
    return chunks


def chunk_decision(decision: Decision, min_chars: int = 100) -> list[Chunk]:
    """Chunks of one decision's reasons section; empty when reasons are absent."""
    if not decision.reasons:
        return []
    return chunk_reasons(decision.reasons, min_chars,
                         decision_id=decision.decision_id, citations=decision.citations)


# --- ingestion ---------------------------------------------------------------

_REQUIRED_FIELDS = ("decision_id", "court", "decided_on", "full_text")


def ingest_decision(raw: dict, registry: ProvisionRegistry, *, source: str = "<memory>") -> Decision:
    """Build a Decision from a normalized ingestion document.

    The document must carry decision_id, court, decided_on (ISO-8601 date)
    and full_text. Citations and the reasons section are derived from
    full_text here, never trusted from the input.
    """
    for fld in _REQUIRED_FIELDS:
        if fld not in raw or raw[fld] in (None, ""):
            raise IngestError(f"{source}: missing or empty field {fld!r}")
    try:
        decided_on = date.fromisoformat(str(raw["decided_on"]))
    except ValueError as exc:
        raise IngestError(f"{source}: bad decided_on {raw['decided_on']!r}: {exc}") from exc
    full_text = str(raw["full_text"])
    return Decision(
        decision_id=str(raw["decision_id"]),
        court=str(raw["court"]),
        decided_on=decided_on,
        full_text=full_text,
        reasons=extract_reasons(full_text),
        citations=frozenset(detect_citations(full_text, registry)),
    )


def parse_document(text: str, registry: ProvisionRegistry, *, source: str = "<memory>") -> Decision:
    """Parse one JSON ingestion document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{source}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise IngestError(f"{source}: document must be a JSON object")
    return ingest_decision(raw, registry, source=source)


def load_corpus(corpus_dir: Path | str, registry: ProvisionRegistry) -> list[Decision]:
    """Ingest every *.json document in a directory, rejecting duplicates."""
    corpus_dir = Path(corpus_dir)
    decisions: list[Decision] = []
    seen: dict[str, str] = {}
    for path in sorted(corpus_dir.glob("*.json")):
        decision = parse_document(path.read_text(encoding="utf-8"), registry,
                                  source=str(path))
        if decision.decision_id in seen:
            raise IngestError(
                f"{path}: duplicate decision_id {decision.decision_id!r} "
                f"(first seen in {seen[decision.decision_id]})")
        seen[decision.decision_id] = str(path)
        decisions.append(decision)
    return decisions


# Portal markup tag names mapped onto the normalized schema. The date tag
# carries YYYYMMDD; text-bearing tags are concatenated in document order.
_PORTAL_ID_TAGS = ("doknr", "aktenzeichen")
_PORTAL_COURT_TAGS = ("gericht", "gertyp")
_PORTAL_DATE_TAG = "entsch-datum"
_PORTAL_TEXT_TAGS = ("titelzeile", "leitsatz", "tenor", "tatbestand",
                     "entscheidungsgruende", "gruende", "text")


def portal_document_to_ingest(xml_text: str, *, source: str = "<memory>") -> dict:
    """Map a case-law portal markup export onto the ingestion schema."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise IngestError(f"{source}: invalid markup: {exc}") from exc

    def first_text(tags: tuple[str, ...]) -> str:
        for tag in tags:
            node = root.find(f".//{tag}")
            if node is not None:
                value = "".join(node.itertext()).strip()
                if value:
                    return value
        return ""

    raw_date = first_text((_PORTAL_DATE_TAG,))
    decided_on = ""
    if re.fullmatch(r"\d{8}", raw_date):
        decided_on = f"{raw_date[:4]}-{raw_date[4:6]}-{raw_date[6:]}"
    elif raw_date:
        decided_on = raw_date

    parts = []
    for tag in _PORTAL_TEXT_TAGS:
        for node in root.iter(tag):
            value = "\n\n".join(s for s in (t.strip() for t in node.itertext()) if s)
            if value:
                heading = {"tatbestand": "Tatbestand:",
                           "entscheidungsgruende": "Entscheidungsgründe:",
                           "gruende": "Gründe:"}.get(tag)
                parts.append(f"{heading}\n{value}" if heading else value)
    return {
        "decision_id": first_text(_PORTAL_ID_TAGS),
        "court": first_text(_PORTAL_COURT_TAGS),
        "decided_on": decided_on,
        "full_text": "\n\n".join(parts),
    }


# --- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class ProvisionStats:
    n_citing_decisions: int
    n_chunks: int
    n_tokens: int


@dataclass(frozen=True)
class CorpusStats:
    n_decisions: int
    per_provision: dict[ProvisionRef, ProvisionStats]
    mean_citations_per_provision: float
    median_citations_per_provision: float


def _count_tokens(text: str) -> int:
    # Whitespace-delimited tokens; descriptive only.
    return len(text.split())


def corpus_stats(
    decisions: list[Decision],
    chunks: list[Chunk],
    registry: ProvisionRegistry,
) -> CorpusStats:
    """Per-provision citation, chunk, and token counts over an ingested corpus.

    Decisions and chunks count toward a registry provision when any of their
    citations falls under it. Mean and median are taken over the multiset of
    per-provision citing-decision counts; an empty registry yields 0 for both.
    """
    per_provision: dict[ProvisionRef, ProvisionStats] = {}
    for ref in registry.refs():
        citing = sum(1 for d in decisions if any(ref.covers(c) for c in d.citations))
        matching = [c for c in chunks if any(ref.covers(x) for x in c.citations)]
        per_provision[ref] = ProvisionStats(
            n_citing_decisions=citing,
            n_chunks=len(matching),
            n_tokens=sum(_count_tokens(c.text) for c in matching),
        )
    counts = [s.n_citing_decisions for s in per_provision.values()]
    return CorpusStats(
        n_decisions=len(decisions),
        per_provision=per_provision,
        mean_citations_per_provision=statistics.fmean(counts) if counts else 0.0,
        median_citations_per_provision=float(statistics.median(counts)) if counts else 0.0,
    )


def stats_rows(stats: CorpusStats) -> list[dict]:
    """Machine-readable table, one row per provision."""
    return [
        {
            "provision": ref.canonical(),
            "n_citing_decisions": s.n_citing_decisions,
            "n_chunks": s.n_chunks,
            "n_tokens": s.n_tokens,
        }
        for ref, s in sorted(stats.per_provision.items(),
                             key=lambda kv: kv[0].sort_key())
    ]


def render_stats_text(stats: CorpusStats) -> str:
    """Human-readable summary of a CorpusStats."""
    lines = [f"Corpus: {stats.n_decisions} decisions"]
    for row in stats_rows(stats):
        lines.append(
            f"  {row['provision']}: {row['n_citing_decisions']} citing decisions, "
            f"{row['n_chunks']} chunks, {row['n_tokens']} tokens")
    lines.append(
        f"Citing decisions per provision: mean {stats.mean_citations_per_provision:.1f}, "
        f"median {stats.median_citations_per_provision:.1f}")
    return "\n".join(lines) + "\n"
