import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kommentar.corpus import (CorpusStats, IngestError, ProvisionStats, Chunk,
                              chunk_decision, chunk_reasons, corpus_stats,
                              extract_reasons, ingest_decision, load_corpus,
                              parse_document, portal_document_to_ingest,
                              render_stats_text, split_paragraphs, stats_rows)
from kommentar.provisions import ProvisionRef

from conftest import FIXTURES


# --- reasons extraction -------------------------------------------------------

def test_reasons_after_single_marker():
    assert extract_reasons("Tatbestand:\nSachverhalt.\n\nGründe: ABC") == "ABC"


def test_reasons_alternate_marker():
    text = "Tatbestand:\nX.\n\nEntscheidungsgründe:\nDer Senat führt aus."
    assert extract_reasons(text) == "Der Senat führt aus."


def test_reasons_first_heading_occurrence_wins():
    # the word at a non-heading position must not match; of the two heading
    # occurrences the first one starts the span
    text = ("Im Tatbestand werden die Gründe des Landgerichts erwähnt.\n"
            "Gründe:\nErster Teil.\n\nGründe:\nZweiter Teil.")
    assert extract_reasons(text) == "Erster Teil.\n\nGründe:\nZweiter Teil."


def test_reasons_absent():
    assert extract_reasons("Tatbestand:\nNur Sachverhalt, keine Begründung.") is None


def test_reasons_marker_requires_heading_position():
    assert extract_reasons("Die Gründe: liegen auf der Hand.") is None
    assert extract_reasons("Gründe des Urteils\nText.") is None


def test_reasons_terminated_by_structural_marker():
    text = "Gründe:\nKern der Begründung.\n\nRechtsmittelbelehrung:\nBelehrung."
    assert extract_reasons(text) == "Kern der Begründung."


def test_marker_priority_order():
    # both markers present: the configured order prefers the more specific one
    text = "Gründe:\nFalscher Teil.\n\nEntscheidungsgründe:\nRichtiger Teil."
    assert extract_reasons(text) == "Richtiger Teil."


# --- chunking -------------------------------------------------------------------

def test_chunk_empty_reasons():
    assert chunk_reasons("") == []


def test_chunk_boundary_at_min_chars():
    paragraphs = ["a" * 99, "b" * 100, "c" * 250]
    chunks = chunk_reasons("\n\n".join(paragraphs))
    assert [c.char_len for c in chunks] == [100, 250]
    assert [c.ordinal for c in chunks] == [0, 1]


def test_chunk_fixture_hand_count(registry):
    doc = json.loads((FIXTURES / "corpus" / "doc01.json").read_text())
    decision = ingest_decision(doc, registry)
    chunks = chunk_decision(decision)
    # 7 paragraphs in the reasons section, 2 under 100 characters
    assert len(split_paragraphs(decision.reasons)) == 7
    assert len(chunks) == 5
    assert [c.ordinal for c in chunks] == [0, 1, 2, 3, 4]
    assert all(c.decision_id == "VI ZR 112/19" for c in chunks)


def test_chunking_is_pure():
    text = "Erster Absatz. " * 10 + "\n\n" + "Zweiter Absatz. " * 10
    assert chunk_reasons(text) == chunk_reasons(text)


@given(st.lists(st.text(alphabet="abc ä\n", max_size=200), max_size=8),
       st.integers(1, 120))
def test_chunk_properties(parts, min_chars):
    text = "\n\n".join(parts)
    chunks = chunk_reasons(text, min_chars)
    paragraphs = split_paragraphs(text)
    assert all(c.char_len >= min_chars for c in chunks)
    assert [c.ordinal for c in chunks] == list(range(len(chunks)))
    # chunk texts are an order-preserving subsequence of the paragraphs
    it = iter(paragraphs)
    assert all(any(c.text == p for p in it) for c in chunks)


# --- ingestion ------------------------------------------------------------------

def test_ingest_detects_subsection_citation(registry):
    doc = json.loads((FIXTURES / "corpus" / "doc01.json").read_text())
    decision = ingest_decision(doc, registry)
    assert ProvisionRef("BGB", 823, 1) in decision.citations


def test_ingest_without_reasons_heading(registry):
    doc = json.loads((FIXTURES / "corpus" / "doc12.json").read_text())
    decision = ingest_decision(doc, registry)
    assert decision.reasons is None
    assert decision.citations == frozenset()


def test_ingest_rejects_malformed_json(registry):
    with pytest.raises(IngestError, match=r"line 1, column"):
        parse_document("{not json", registry, source="bad.json")


def test_ingest_rejects_missing_field(registry):
    with pytest.raises(IngestError, match="full_text"):
        ingest_decision({"decision_id": "X", "court": "BGH",
                         "decided_on": "2020-01-01"}, registry)


def test_ingest_rejects_bad_date(registry):
    with pytest.raises(IngestError, match="decided_on"):
        ingest_decision({"decision_id": "X", "court": "BGH",
                         "decided_on": "gestern", "full_text": "t"}, registry)


def test_load_corpus_rejects_duplicates(registry, tmp_path):
    doc = {"decision_id": "X", "court": "BGH", "decided_on": "2020-01-01",
           "full_text": "§ 242 BGB"}
    for name in ("a.json", "b.json"):
        (tmp_path / name).write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(IngestError, match="duplicate decision_id"):
        load_corpus(tmp_path, registry)


def test_portal_adapter():
    xml = """<dokument>
      <doknr>KORE123452020</doknr>
      <gericht>BGH</gericht>
      <entsch-datum>20200310</entsch-datum>
      <tatbestand><p>Der Kläger verlangt Schadensersatz.</p></tatbestand>
      <entscheidungsgruende><p>Die Klage ist nach § 823 Abs. 1 BGB begründet.</p>
      </entscheidungsgruende>
    </dokument>"""
    raw = portal_document_to_ingest(xml)
    assert raw["decision_id"] == "KORE123452020"
    assert raw["court"] == "BGH"
    assert raw["decided_on"] == "2020-03-10"
    assert "Entscheidungsgründe:" in raw["full_text"]
    assert "§ 823 Abs. 1 BGB" in raw["full_text"]


def test_portal_adapter_rejects_bad_markup():
    with pytest.raises(IngestError, match="invalid markup"):
        portal_document_to_ingest("<unclosed>")


# --- statistics -----------------------------------------------------------------

def test_fixture_corpus_stats(registry):
    decisions = load_corpus(FIXTURES / "corpus", registry)
    chunks = [c for d in decisions for c in chunk_decision(d)]
    stats = corpus_stats(decisions, chunks, registry)
    assert stats.n_decisions == 12
    counts = {ref.section: s.n_citing_decisions
              for ref, s in stats.per_provision.items()}
    assert counts == {242: 3, 280: 3, 812: 2, 823: 4}
    assert stats.mean_citations_per_provision == 3.0
    assert stats.median_citations_per_provision == 3.0
    # token counts recomputed by the declared rule
    for ref, s in stats.per_provision.items():
        expected = sum(len(c.text.split()) for c in chunks
                       if any(ref.covers(x) for x in c.citations))
        assert s.n_tokens == expected


def test_single_decision_stats(registry):
    doc = {"decision_id": "X", "court": "BGH", "decided_on": "2020-01-01",
           "full_text": "Gründe:\n" + "Der Anspruch aus § 242 BGB besteht. " * 5}
    decision = ingest_decision(doc, registry)
    chunks = chunk_decision(decision)
    stats = corpus_stats([decision], chunks, registry)
    counts = [s.n_citing_decisions for s in stats.per_provision.values()]
    assert sorted(counts) == [0, 0, 0, 1]
    assert stats.mean_citations_per_provision == 0.25
    assert stats.median_citations_per_provision == 0.0


def test_empty_corpus_stats(registry):
    stats = corpus_stats([], [], registry)
    assert stats.n_decisions == 0
    assert stats.mean_citations_per_provision == 0.0
    assert stats.median_citations_per_provision == 0.0


def test_stats_report_renders_given_counts():
    published = {242: 357, 280: 484, 812: 260, 823: 509}
    per = {ProvisionRef("BGB", s): ProvisionStats(n, 0, 0)
           for s, n in published.items()}
    counts = sorted(published.values())
    stats = CorpusStats(n_decisions=4555, per_provision=per,
                        mean_citations_per_provision=sum(counts) / 4,
                        median_citations_per_provision=(counts[1] + counts[2]) / 2)
    text = render_stats_text(stats)
    for section, n in published.items():
        assert f"§ {section} BGB: {n} citing decisions" in text
    rows = {r["provision"]: r["n_citing_decisions"] for r in stats_rows(stats)}
    assert rows == {f"§ {s} BGB": n for s, n in published.items()}
