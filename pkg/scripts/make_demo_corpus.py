#!/usr/bin/env python3
"""Build a synthetic decision corpus for offline end-to-end runs.

The paragraphs are engineered for the deterministic mock backend: each topic
group repeats a CLUSTER<...> marker token so the extracted keywords inherit
the marker and embed near a shared direction, which makes the groups
separable for the clustering stage. Unmarked paragraphs land at random
directions and end up as noise.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

REGISTRY_ROWS = [
    {
        "book": "BGB", "section": 242, "heading": "Leistung nach Treu und Glauben",
        "body": ("Der Schuldner ist verpflichtet, die Leistung so zu bewirken, "
                 "wie Treu und Glauben mit Rücksicht auf die Verkehrssitte es "
                 "erfordern."),
    },
    {
        "book": "BGB", "section": 280, "heading": "Schadensersatz wegen Pflichtverletzung",
        "body": ("(1) Verletzt der Schuldner eine Pflicht aus dem Schuldverhältnis, "
                 "so kann der Gläubiger Ersatz des hierdurch entstehenden Schadens "
                 "verlangen. Dies gilt nicht, wenn der Schuldner die Pflichtverletzung "
                 "nicht zu vertreten hat. (2) Schadensersatz wegen Verzögerung der "
                 "Leistung kann der Gläubiger nur unter der zusätzlichen Voraussetzung "
                 "des § 286 verlangen."),
    },
    {
        "book": "BGB", "section": 812, "heading": "Herausgabeanspruch",
        "body": ("(1) Wer durch die Leistung eines anderen oder in sonstiger Weise "
                 "auf dessen Kosten etwas ohne rechtlichen Grund erlangt, ist ihm "
                 "zur Herausgabe verpflichtet. Diese Verpflichtung besteht auch dann, "
                 "wenn der rechtliche Grund später wegfällt oder der mit einer "
                 "Leistung nach dem Inhalt des Rechtsgeschäfts bezweckte Erfolg "
                 "nicht eintritt."),
    },
    {
        "book": "BGB", "section": 823, "heading": "Schadensersatzpflicht",
        "body": ("(1) Wer vorsätzlich oder fahrlässig das Leben, den Körper, die "
                 "Gesundheit, die Freiheit, das Eigentum oder ein sonstiges Recht "
                 "eines anderen widerrechtlich verletzt, ist dem anderen zum Ersatz "
                 "des daraus entstehenden Schadens verpflichtet. (2) Die gleiche "
                 "Verpflichtung trifft denjenigen, welcher gegen ein den Schutz "
                 "eines anderen bezweckendes Gesetz verstößt."),
    },
]

TOPICS = ["Verjährung", "Kausalität", "Beweislast", "Mitverschulden",
          "Aufklärungspflicht", "Rückabwicklung"]

_FILLER = ("Die Kammer folgt insoweit der gefestigten Rechtsprechung des Senats "
           "und sieht keinen Anlass für eine abweichende Beurteilung der Sach- "
           "und Rechtslage im vorliegenden Fall.")


def _paragraph(section: int, group: int, topic: str, index: int) -> str:
    marker = f"CLUSTER{section}x{group}:"
    first = (f"{marker} {marker} {marker} {topic} {topic} bei der Anwendung von "
             f"§ {section} BGB ist im Fall {index} nach den allgemeinen "
             f"Grundsätzen zu beurteilen.")
    return f"{first} {_FILLER}"


def _noise_paragraph(section: int, index: int) -> str:
    return (f"Die weiteren Rügen der Revision zu § {section} BGB hat der Senat "
            f"geprüft und im Ergebnis als nicht durchgreifend erachtet; von "
            f"einer näheren Begründung wird abgesehen (Randnummer {index}).")


def build_documents(groups_per_provision: int = 2, per_group: int = 8,
                    noise_per_provision: int = 2) -> list[dict]:
    documents = []
    for row_index, row in enumerate(REGISTRY_ROWS):
        section = row["section"]
        paragraphs = []
        for group in range(1, groups_per_provision + 1):
            topic = TOPICS[(row_index + group) % len(TOPICS)]
            for index in range(per_group):
                paragraphs.append(_paragraph(section, group, topic, index))
        for index in range(noise_per_provision):
            paragraphs.append(_noise_paragraph(section, index))
        body = "\n\n".join(paragraphs)
        documents.append({
            "decision_id": f"DEMO ZR {section}/24",
            "court": "BGH",
            "decided_on": "2024-01-15",
            "full_text": (f"Tatbestand:\nDie Parteien streiten über Ansprüche "
                          f"aus § {section} BGB.\n\nEntscheidungsgründe:\n{body}"),
        })
    return documents


def write_demo_workspace(root: Path, *, seed: int = 42,
                         groups_per_provision: int = 2, per_group: int = 8,
                         noise_per_provision: int = 2,
                         min_cluster_size: int = 5) -> Path:
    """Write corpus, registry, and config under root; returns the config path."""
    root = Path(root)
    corpus_dir = root / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for doc in build_documents(groups_per_provision, per_group, noise_per_provision):
        name = doc["decision_id"].replace(" ", "_").replace("/", "-") + ".json"
        (corpus_dir / name).write_text(
            json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    registry_file = root / "provisions.json"
    registry_file.write_text(json.dumps(REGISTRY_ROWS, ensure_ascii=False, indent=2)
                             + "\n", encoding="utf-8")
    config_path = root / "config.yaml"
    config_path.write_text(
        "corpus_dir: corpus\n"
        "store_dir: store\n"
        "cache_dir: cache\n"
        "registry_file: provisions.json\n"
        f"seed: {seed}\n"
        "backend: mock\n"
        "cluster:\n"
        f"  min_cluster_size: {min_cluster_size}\n",
        encoding="utf-8")
    return config_path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", type=Path, help="workspace directory to create")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    config = write_demo_workspace(args.root, seed=args.seed)
    print(f"demo workspace ready; config at {config}")


if __name__ == "__main__":
    main()
