"""File-store helpers: atomic writes, JSONL, and content digests."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path


def canonical_json(data) -> str:
    return json.dumps(data, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":"))


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a sibling temp file and atomic rename; never partial."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp.{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, data) -> None:
    atomic_write_text(path, json.dumps(data, ensure_ascii=False, indent=2,
                                       sort_keys=True) + "\n")


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def write_jsonl(path: Path, rows: list[dict]) -> None:
    atomic_write_text(path, "".join(json.dumps(r, ensure_ascii=False) + "\n"
                                    for r in rows))


def read_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def digest_tree(root: Path, pattern: str = "**/*") -> str:
    """Digest of a directory: sorted (relative path, file digest) pairs."""
    root = Path(root)
    if not root.exists():
        return ""
    entries = sorted(
        (str(p.relative_to(root)), sha256_file(p))
        for p in root.glob(pattern) if p.is_file())
    return sha256_text(canonical_json(entries))
