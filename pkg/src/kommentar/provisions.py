"""Statutory provision references and the provision registry."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path


class ProvisionError(ValueError):
    """Invalid provision reference or registry content."""


_CANONICAL_RE = re.compile(r"^§\s*(\d+)(?:\s*\(\s*(\d+)\s*\))?\s+(\S+)$")


@dataclass(frozen=True)
class ProvisionRef:
    """A numbered section of a statute book, e.g. § 823 (1) BGB."""

    book: str
    section: int
    subsection: int | None = None

    def __post_init__(self) -> None:
        if not self.book:
            raise ProvisionError("provision book must be non-empty")
        if self.section < 1:
            raise ProvisionError(f"section must be >= 1, got {self.section}")
        if self.subsection is not None and self.subsection < 1:
            raise ProvisionError(f"subsection must be >= 1, got {self.subsection}")

    def canonical(self) -> str:
        """Deterministic rendering: '§ 823 (1) BGB' / '§ 242 BGB'."""
        if self.subsection is None:
            return f"§ {self.section} {self.book}"
        return f"§ {self.section} ({self.subsection}) {self.book}"

    def base(self) -> ProvisionRef:
        """The whole-section reference, subsection dropped."""
        if self.subsection is None:
            return self
        return ProvisionRef(self.book, self.section)

    def slug(self) -> str:
        """Filesystem-safe identifier, e.g. 'BGB_823' or 'BGB_823_1'."""
        parts = [self.book, str(self.section)]
        if self.subsection is not None:
            parts.append(str(self.subsection))
        return "_".join(parts)

    def covers(self, cited: ProvisionRef) -> bool:
        """Whether a detected citation falls under this registry entry.

        An entry without subsection covers all subsections of its section;
        an entry with a subsection covers only that exact subsection.
        """
        if (self.book, self.section) != (cited.book, cited.section):
            return False
        return self.subsection is None or self.subsection == cited.subsection

    def sort_key(self) -> tuple[str, int, int]:
        return (self.book, self.section, self.subsection or 0)


def parse_provision(text: str) -> ProvisionRef:
    """Parse the canonical rendering back into a reference."""
    m = _CANONICAL_RE.match(text.strip())
    if not m:
        raise ProvisionError(f"not a canonical provision reference: {text!r}")
    section, subsection, book = m.groups()
    return ProvisionRef(book, int(section), int(subsection) if subsection else None)


@dataclass(frozen=True)
class ProvisionText:
    """Statutory text of one provision: reference, heading, body."""

    ref: ProvisionRef
    heading: str
    body: str

    def __post_init__(self) -> None:
        if not self.body:
            raise ProvisionError(f"empty statutory text for {self.ref.canonical()}")


class ProvisionRegistry:
    """The set of provisions the pipeline knows statutory text for.

    Citation detection is scoped to this registry: references to books or
    sections not registered here are dropped.
    """

    def __init__(self, entries: list[ProvisionText]):
        self._by_ref: dict[ProvisionRef, ProvisionText] = {}
        for entry in entries:
            if entry.ref in self._by_ref:
                raise ProvisionError(f"duplicate registry entry {entry.ref.canonical()}")
            self._by_ref[entry.ref] = entry
        self._books = {ref.book for ref in self._by_ref}

    def __len__(self) -> int:
        return len(self._by_ref)

    def refs(self) -> list[ProvisionRef]:
        return sorted(self._by_ref, key=ProvisionRef.sort_key)

    def books(self) -> set[str]:
        return set(self._books)

    def citable(self, cited: ProvisionRef) -> bool:
        """Whether any registry entry covers the detected citation."""
        return any(ref.covers(cited) for ref in self._by_ref)

    def covering_ref(self, cited: ProvisionRef) -> ProvisionRef | None:
        """The registry reference a citation falls under, if any."""
        for ref in self.refs():
            if ref.covers(cited):
                return ref
        return None

    def text_for(self, ref: ProvisionRef) -> ProvisionText:
        """Statutory text for a reference; subsection refs fall back to the section entry."""
        entry = self._by_ref.get(ref) or self._by_ref.get(ref.base())
        if entry is None:
            raise ProvisionError(f"no statutory text registered for {ref.canonical()}")
        return entry

    @classmethod
    def from_file(cls, path: Path | str) -> ProvisionRegistry:
        """Load from a JSON list of {book, section, subsection?, heading, body}."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, list):
            raise ProvisionError(f"registry file {path} must contain a JSON list")
        entries = []
        for i, item in enumerate(raw):
            try:
                ref = ProvisionRef(item["book"], int(item["section"]),
                                   int(item["subsection"]) if item.get("subsection") else None)
                entries.append(ProvisionText(ref, item.get("heading", ""), item["body"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ProvisionError(f"registry file {path}, entry {i}: {exc}") from exc
        return cls(entries)

    def to_file(self, path: Path | str) -> None:
        rows = []
        for ref in self.refs():
            entry = self._by_ref[ref]
            row = {"book": ref.book, "section": ref.section, "heading": entry.heading,
                   "body": entry.body}
            if ref.subsection is not None:
                row["subsection"] = ref.subsection
            rows.append(row)
        Path(path).write_text(json.dumps(rows, ensure_ascii=False, indent=2) + "\n",
                              encoding="utf-8")
