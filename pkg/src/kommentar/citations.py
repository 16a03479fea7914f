"""Detection of statutory citations in German court-decision text.

Covers single references ("§ 242 BGB"), list forms ("§§ 280, 812 BGB"),
and subsections written as "Abs. 1" or "(1)". Only provisions covered by
the provision registry are emitted; everything else is dropped so stray
references to other statute books never reach downstream prompts.
"""

from __future__ import annotations

import re

from .provisions import ProvisionRef, ProvisionRegistry

# One list item: section number, optional subsection, optional sentence part
# ("Satz 1"), which is consumed so the book token that follows is still seen.
_ITEM = r"\d+\s*(?:Abs\.\s*\d+|\(\s*\d+\s*\))?(?:\s*(?:S\.|Satz)\s*\d+)?"
_SEP = r"(?:\s*,\s*|\s+(?:und|u\.|oder)\s+)"
_BOOK = r"[A-ZÄÖÜ][A-Za-z0-9ÄÖÜäöüß]*"

CITATION_RE = re.compile(rf"§§?\s*(?P<items>{_ITEM}(?:{_SEP}{_ITEM})*)\s+(?P<book>{_BOOK})")
_ITEM_RE = re.compile(r"(?P<section>\d+)\s*(?:Abs\.\s*(?P<abs>\d+)|\(\s*(?P<paren>\d+)\s*\))?")


def detect_citations(text: str, registry: ProvisionRegistry) -> set[ProvisionRef]:
    """All registry-covered provisions cited in the text, deduplicated."""
    found: set[ProvisionRef] = set()
    for match in CITATION_RE.finditer(text):
        book = match.group("book")
        for item in _ITEM_RE.finditer(match.group("items")):
            subsection = item.group("abs") or item.group("paren")
            ref = ProvisionRef(book, int(item.group("section")),
                               int(subsection) if subsection else None)
            if registry.citable(ref):
                found.add(ref)
    return found


def render_citations(refs: set[ProvisionRef]) -> str:
    """Canonical, deterministic rendering of a citation set."""
    return "; ".join(ref.canonical() for ref in sorted(refs, key=ProvisionRef.sort_key))
