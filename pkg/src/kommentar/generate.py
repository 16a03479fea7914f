"""Headline, section, and merged-commentary generation with citation guarding.

Generated text cites source records through ObjectId('<24 hex>') tokens.
The hard guarantee enforced here is referential: a model may drop citations
it was given, but any token that was not in its input is a fabrication and
the call fails after one retry. Whether a citation semantically supports its
statement stays with the rubric judge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .enrich import RECORD_ID_RE, Record
from .gateway import Gateway, GatewayError, ModelId, get_template
from .provisions import ProvisionRef, ProvisionText

OBJECT_ID_RE = re.compile(r"ObjectId\('([0-9a-f]{24})'\)")
# Lenient scan used for verification: catches corrupted hex payloads too.
OBJECT_ID_ANY_RE = re.compile(r"ObjectId\('([^']*)'\)")

_EXCERPT_RADIUS = 80


class FabricationError(GatewayError):
    """Model output cited a record id it was never given."""


def render_object_id(record_id: str) -> str:
    return f"ObjectId('{record_id}')"


def scan_object_ids(text: str) -> set[str]:
    """All well-formed ObjectId payloads in a text."""
    return set(OBJECT_ID_RE.findall(text))


@dataclass(frozen=True)
class SectionDraft:
    provision: ProvisionRef
    cluster_index: int
    headline: str
    body: str
    cited_record_ids: frozenset[str]

    def to_dict(self) -> dict:
        return {"cluster_index": self.cluster_index, "headline": self.headline,
                "body": self.body, "cited_record_ids": sorted(self.cited_record_ids)}


@dataclass(frozen=True)
class Commentary:
    provision: ProvisionRef
    model: ModelId
    text: str
    cited_record_ids: frozenset[str]
    source_cluster_indices: tuple[int, ...]
    run_manifest_ref: str

    def to_dict(self) -> dict:
        return {
            "provision": self.provision.canonical(),
            "model": str(self.model),
            "text": self.text,
            "cited_record_ids": sorted(self.cited_record_ids),
            "source_cluster_indices": list(self.source_cluster_indices),
            "run_manifest_ref": self.run_manifest_ref,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Commentary:
        from .provisions import parse_provision

        return cls(
            provision=parse_provision(data["provision"]),
            model=ModelId.parse(data["model"]),
            text=data["text"],
            cited_record_ids=frozenset(data["cited_record_ids"]),
            source_cluster_indices=tuple(data["source_cluster_indices"]),
            run_manifest_ref=data["run_manifest_ref"],
        )


def _check_citations(text: str, allowed: frozenset[str], context: str) -> frozenset[str]:
    found = set(OBJECT_ID_ANY_RE.findall(text))
    bad = {t for t in found if not RECORD_ID_RE.match(t) or t not in allowed}
    if bad:
        raise FabricationError(
            f"{context}: output cites ids not present in the input: "
            f"{sorted(bad)[:5]}")
    return frozenset(found)


def generate_headline(
    headline_keywords: list[str],
    target: ProvisionRef,
    gateway: Gateway,
    model: ModelId,
) -> str:
    """A single-line heading from a cluster's centroid-nearest keywords."""
    if not headline_keywords:
        raise ValueError("generate_headline needs at least one keyword")
    template = get_template("headline")
    text = gateway.complete(template, {
        "provision_ref": target.canonical(),
        "keywords": "\n".join(f"- {k}" for k in headline_keywords),
    }, model)
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise GatewayError("empty headline from model")
    return lines[0]


def generate_section(
    headline: str,
    member_summaries: list[tuple[str, str]],
    target: ProvisionRef,
    gateway: Gateway,
    model: ModelId,
    *,
    cluster_index: int = 0,
) -> SectionDraft:
    """Section body from all member summaries; cites only supplied ObjectIds.

    Summaries are presented in a fixed order (descending length, tie by
    record id) so reruns see identical prompts. A fabricated citation in the
    output triggers one cache-bypassing retry, then fails.
    """
    if not member_summaries:
        raise ValueError("generate_section needs at least one member summary")
    ordered = sorted(member_summaries, key=lambda kv: (-len(kv[1]), kv[0]))
    allowed = frozenset(record_id for record_id, _ in ordered)
    template = get_template("section")
    bindings = {
        "headline": headline,
        "provision_ref": target.canonical(),
        "summaries": "\n\n".join(f"{render_object_id(rid)}: {summary}"
                                 for rid, summary in ordered),
    }
    body = gateway.complete(template, bindings, model)
    try:
        cited = _check_citations(body, allowed, f"section {target.canonical()}")
    except FabricationError:
        body = gateway.complete(template, bindings, model, bypass_cache=True)
        cited = _check_citations(body, allowed, f"section {target.canonical()}")
    return SectionDraft(provision=target, cluster_index=cluster_index,
                        headline=headline, body=body, cited_record_ids=cited)


def concatenate_drafts(drafts: list[SectionDraft]) -> str:
    """Headline-section pairs joined with explicit section delimiters."""
    return "\n\n".join(f"## {d.cluster_index + 1}. {d.headline}\n\n{d.body}"
                       for d in drafts)


def merge_prompt_bindings(drafts: list[SectionDraft],
                          target: ProvisionText) -> dict[str, str]:
    """Template bindings for the merge step; also used to archive the prompt."""
    heading = f" {target.heading}" if target.heading else ""
    return {
        "normtext": f"{target.ref.canonical()}{heading}\n{target.body}",
        "draft": concatenate_drafts(drafts),
    }


def merge_commentary(
    drafts: list[SectionDraft],
    target: ProvisionText,
    gateway: Gateway,
    model: ModelId,
    *,
    run_manifest_ref: str = "",
    language: str = "de",
) -> Commentary:
    """One merged commentary per generator model from the ordered drafts.

    The model may drop citations but must not invent any; a fabricated
    ObjectId fails the call after one retry. Empty output is permanent.
    """
    if not drafts:
        raise ValueError("merge_commentary needs at least one draft")
    template = get_template("merge_commentary", language)
    bindings = merge_prompt_bindings(drafts, target)
    allowed = frozenset().union(*(d.cited_record_ids for d in drafts))
    text = gateway.complete(template, bindings, model)
    if not text.strip():
        raise GatewayError(f"empty commentary from {model}")
    try:
        cited = _check_citations(text, allowed, f"merge {target.ref.canonical()}")
    except FabricationError:
        text = gateway.complete(template, bindings, model, bypass_cache=True)
        if not text.strip():
            raise GatewayError(f"empty commentary from {model}")
        cited = _check_citations(text, allowed, f"merge {target.ref.canonical()}")
    return Commentary(
        provision=target.ref, model=model, text=text.strip() + "\n",
        cited_record_ids=cited,
        source_cluster_indices=tuple(d.cluster_index for d in drafts),
        run_manifest_ref=run_manifest_ref,
    )


# --- citation verification ----------------------------------------------------


@dataclass(frozen=True)
class ResolvedCitation:
    record_id: str
    decision_id: str
    ordinal: int
    excerpt: str

    def to_dict(self) -> dict:
        return {"record_id": self.record_id, "decision_id": self.decision_id,
                "ordinal": self.ordinal, "excerpt": self.excerpt}


@dataclass(frozen=True)
class UnresolvedCitation:
    token: str
    excerpt: str

    def to_dict(self) -> dict:
        return {"token": self.token, "excerpt": self.excerpt}


@dataclass(frozen=True)
class CitationReport:
    provision: ProvisionRef
    model: ModelId
    resolvable: tuple[ResolvedCitation, ...]
    unresolvable: tuple[UnresolvedCitation, ...]

    @property
    def n_resolvable(self) -> int:
        return len(self.resolvable)

    @property
    def n_unresolvable(self) -> int:
        return len(self.unresolvable)

    def to_dict(self) -> dict:
        return {
            "provision": self.provision.canonical(),
            "model": str(self.model),
            "n_resolvable": self.n_resolvable,
            "n_unresolvable": self.n_unresolvable,
            "resolvable": [c.to_dict() for c in self.resolvable],
            "unresolvable": [c.to_dict() for c in self.unresolvable],
        }


def _excerpt(text: str, start: int, end: int) -> str:
    lo = max(0, start - _EXCERPT_RADIUS)
    hi = min(len(text), end + _EXCERPT_RADIUS)
    prefix = "…" if lo > 0 else ""
    suffix = "…" if hi < len(text) else ""
    return prefix + text[lo:hi].replace("\n", " ") + suffix


def verify_citations(commentary: Commentary,
                     store_index: dict[str, Record]) -> CitationReport:
    """Resolve every ObjectId token in the commentary against the record store.

    Unresolvable tokens (bad hex or unknown ids) are report content, not
    errors; each carries the surrounding text so a reviewer can locate it.
    Repeated occurrences of the same token are reported once per occurrence.
    """
    resolvable: list[ResolvedCitation] = []
    unresolvable: list[UnresolvedCitation] = []
    for match in OBJECT_ID_ANY_RE.finditer(commentary.text):
        token = match.group(1)
        excerpt = _excerpt(commentary.text, match.start(), match.end())
        record = store_index.get(token) if RECORD_ID_RE.match(token) else None
        if record is None:
            unresolvable.append(UnresolvedCitation(token=token, excerpt=excerpt))
        else:
            resolvable.append(ResolvedCitation(
                record_id=token, decision_id=record.decision_id,
                ordinal=record.ordinal, excerpt=excerpt))
    return CitationReport(provision=commentary.provision, model=commentary.model,
                          resolvable=tuple(resolvable),
                          unresolvable=tuple(unresolvable))


def render_with_footnotes(commentary: Commentary,
                          store_index: dict[str, Record]) -> str:
    """Human-readable rendering: ObjectId tokens become [decision_id, para N]."""

    def substitute(match: re.Match) -> str:
        record = store_index.get(match.group(1))
        if record is None:
            return match.group(0)
        return f"[{record.decision_id}, para {record.ordinal}]"

    return OBJECT_ID_ANY_RE.sub(substitute, commentary.text)
