import pytest

from kommentar.corpus import Chunk
from kommentar.enrich import (RECORD_ID_RE, Record, RecordStore, build_records,
                              embed_records, extract_keyword, make_record_id,
                              summarize_chunk)
from kommentar.gateway import Embedding, Gateway, ModelId
from kommentar.mock_backend import MockBackend
from kommentar.provisions import ProvisionRef

MODEL = ModelId("openai", "gpt-4o")
EMBED = ModelId("openai", "text-embedding-3-large")
P242 = ProvisionRef("BGB", 242)
P280 = ProvisionRef("BGB", 280)
P812 = ProvisionRef("BGB", 812)


def chunk_for(*provisions, text="Der Senat bejaht den Anspruch. Weitere Details.",
              ordinal=0):
    return Chunk(decision_id="X ZR 1/20", ordinal=ordinal, text=text,
                 citations=frozenset(provisions))


class RecordingBackend(MockBackend):
    """Mock backend that keeps every rendered prompt for inspection."""

    def __init__(self, seed=42):
        super().__init__(seed)
        self.prompts = []

    def complete(self, template, bindings, rendered, model, params):
        self.prompts.append(rendered)
        return super().complete(template, bindings, rendered, model, params)


def test_record_id_shape_and_determinism():
    a = make_record_id(42, P242, "X ZR 1/20", 0)
    assert RECORD_ID_RE.match(a)
    assert a == make_record_id(42, P242, "X ZR 1/20", 0)
    assert a != make_record_id(43, P242, "X ZR 1/20", 0)
    assert a != make_record_id(42, P242, "X ZR 1/20", 1)


def test_record_invariants():
    with pytest.raises(ValueError, match="24 hex"):
        Record("xyz", P242, "d", 0, "s", "k", None, True)
    with pytest.raises(ValueError, match="empty keyword"):
        Record("a" * 24, P242, "d", 0, "s", "", None, True)
    with pytest.raises(ValueError, match="neither keyword nor embedding"):
        Record("a" * 24, P242, "d", 0, "", "k", None, False)


def test_summarize_chunk_mock(registry, mock_gateway):
    summary, relevant = summarize_chunk(chunk_for(P242), P242, registry,
                                        mock_gateway, MODEL)
    assert relevant
    assert summary == "SUMMARY: Der Senat bejaht den Anspruch."


def test_summarize_requires_target_cited(registry, mock_gateway):
    with pytest.raises(ValueError, match="does not cite"):
        summarize_chunk(chunk_for(P242), P280, registry, mock_gateway, MODEL)


def test_summarize_prompt_carries_all_cited_provision_texts(registry, tmp_path):
    backend = RecordingBackend()
    gateway = Gateway(backend, tmp_path / "c")
    summarize_chunk(chunk_for(P280, P812), P280, registry, gateway, MODEL)
    prompt = backend.prompts[-1]
    assert registry.text_for(P280).body in prompt
    assert registry.text_for(P812).body in prompt


def test_sentinel_marks_chunk_irrelevant(registry, mock_gateway):
    marked = chunk_for(P242, text="##OFFTOPIC## Nur Kosten und Nebenpunkte, "
                                  "keine inhaltliche Anwendung der Norm.")
    summary, relevant = summarize_chunk(marked, P242, registry, mock_gateway, MODEL)
    assert not relevant and summary == ""


def test_extract_keyword_prompt_contains_provision_body(registry, tmp_path):
    backend = RecordingBackend()
    gateway = Gateway(backend, tmp_path / "c")
    extract_keyword("SUMMARY: Herausgabe des Erlangten nach Bereicherungsrecht",
                    P812, registry, gateway, MODEL)
    assert registry.text_for(P812).body in backend.prompts[-1]


def test_extract_keyword_truncates_long_output(registry, tmp_path):
    class Wordy(MockBackend):
        def complete(self, template, bindings, rendered, model, params):
            return ("Anspruch auf Herausgabe des ohne Rechtsgrund Erlangten, "
                    "Abgrenzung der Leistungskondiktion von der "
                    "Nichtleistungskondiktion nach allgemeinen Grundsätzen im Fall")

    gateway = Gateway(Wordy(42), tmp_path / "c")
    keyword = extract_keyword("egal", P812, registry, gateway, MODEL)
    assert len(keyword.split()) <= 12
    # cut at the comma inside the first twelve tokens
    assert keyword == "Anspruch auf Herausgabe des ohne Rechtsgrund Erlangten"


def test_extract_keyword_empty_output_retried_then_irrelevant(registry, tmp_path):
    class Silent(MockBackend):
        def __init__(self):
            super().__init__(0)
            self.calls = 0

        def complete(self, template, bindings, rendered, model, params):
            self.calls += 1
            if template.template_id.startswith("keyword"):
                return ""
            return super().complete(template, bindings, rendered, model, params)

    backend = Silent()
    gateway = Gateway(backend, tmp_path / "c")
    records = build_records([chunk_for(P242)], P242, registry, gateway, MODEL, 42)
    assert backend.calls >= 3  # summarize + keyword + one keyword retry
    assert len(records) == 1
    assert not records[0].relevant


def test_build_records_one_per_provision_chunk_pair(registry, mock_gateway):
    chunks = [chunk_for(P280, P812, ordinal=i) for i in range(3)]
    under_280 = build_records(chunks, P280, registry, mock_gateway, MODEL, 1)
    under_812 = build_records(chunks, P812, registry, mock_gateway, MODEL, 1)
    assert len(under_280) == len(under_812) == 3
    assert {r.record_id for r in under_280}.isdisjoint(
        {r.record_id for r in under_812})


def test_embed_records_identical_keywords_share_vectors(registry, mock_gateway):
    records = [Record(make_record_id(1, P242, "d", i), P242, "d", i,
                      "SUMMARY: x", "Verwirkung", None, True) for i in range(2)]
    out = embed_records(records, mock_gateway, EMBED)
    assert out[0].embedding == out[1].embedding
    assert out[0].embedding.normalized


def test_embed_records_batch_of_40(registry, mock_gateway):
    records = [Record(make_record_id(1, P242, "d", i), P242, "d", i,
                      "SUMMARY: x", f"Schlagwort {i}", None, True)
               for i in range(40)]
    out = embed_records(records, mock_gateway, EMBED)
    assert len(out) == 40
    assert {r.embedding.dim for r in out} == {MockBackend.dim}


def test_embed_records_skips_guard_violation(registry, mock_gateway, caplog):
    good = Record(make_record_id(1, P242, "d", 0), P242, "d", 0,
                  "SUMMARY: x", "Verwirkung", None, True)
    bad = Record(make_record_id(1, P242, "d", 1), P242, "d", 1,
                 "SUMMARY: y", "platzhalter", None, True)
    object.__setattr__(bad, "keyword", "")
    with caplog.at_level("WARNING"):
        out = embed_records([good, bad], mock_gateway, EMBED)
    assert [r.record_id for r in out] == [good.record_id]
    assert "skipping" in caplog.text


def test_record_store_roundtrip_and_uniqueness(tmp_path):
    store = RecordStore(tmp_path / "records")
    emb = Embedding.from_raw([1.0, 2.0])
    records = [Record(make_record_id(5, P242, "d", i), P242, "d", i,
                      "SUMMARY: x", "kw", emb, True) for i in range(3)]
    store.write(P242, records)
    loaded = store.load(P242)
    assert loaded == sorted(records, key=lambda r: r.record_id)
    with pytest.raises(ValueError, match="already stored"):
        store.write(P242, records[:1])
    index = store.index()
    assert set(index) == {r.record_id for r in records}
    assert store.provisions() == [P242]
