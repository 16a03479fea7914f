import pytest

from kommentar.enrich import Record, make_record_id
from kommentar.gateway import Gateway, GatewayError, ModelId
from kommentar.generate import (Commentary, FabricationError, SectionDraft,
                                generate_headline, generate_section,
                                merge_commentary, render_object_id,
                                render_with_footnotes, scan_object_ids,
                                verify_citations)
from kommentar.mock_backend import MockBackend
from kommentar.provisions import ProvisionRef

MODEL = ModelId("openai", "gpt-4o")
P242 = ProvisionRef("BGB", 242)


def rid(i: int) -> str:
    return make_record_id(9, P242, "X ZR 2/21", i)


def store_index(n=3) -> dict[str, Record]:
    return {
        rid(i): Record(rid(i), P242, "X ZR 2/21", i,
                       summary=f"SUMMARY: Aussage {i}.", keyword="",
                       embedding=None, relevant=False)
        for i in range(n)
    }


def drafts_for(ids) -> list[SectionDraft]:
    body = " ".join(f"Aussage {render_object_id(r)}." for r in ids)
    return [SectionDraft(P242, 0, "Verwirkung", body, frozenset(ids))]


class StubMerge(MockBackend):
    """Overrides only merge output; everything else stays deterministic."""

    def __init__(self, merge_response: str):
        super().__init__(0)
        self.merge_response = merge_response
        self.merge_calls = 0

    def complete(self, template, bindings, rendered, model, params):
        if template.template_id.startswith("merge_commentary"):
            self.merge_calls += 1
            return self.merge_response
        return super().complete(template, bindings, rendered, model, params)


def test_headline_is_single_line_and_stable(mock_gateway):
    keywords = ["Verwirkung", "Zeitmoment", "Umstandsmoment", "Vertrauen", "Treu"]
    first = generate_headline(keywords, P242, mock_gateway, MODEL)
    second = generate_headline(keywords, P242, mock_gateway, MODEL)
    assert first == second
    assert "\n" not in first
    assert first == "Verwirkung / Zeitmoment / Umstandsmoment / Vertrauen / Treu"


def test_headline_requires_keywords(mock_gateway):
    with pytest.raises(ValueError):
        generate_headline([], P242, mock_gateway, MODEL)


def test_section_cites_all_supplied_ids(registry, mock_gateway):
    summaries = [(rid(i), f"SUMMARY: Aussage {i} zur Verwirkung.") for i in range(3)]
    draft = generate_section("Verwirkung", summaries, P242, mock_gateway, MODEL)
    assert draft.cited_record_ids == {rid(i) for i in range(3)}
    assert scan_object_ids(draft.body) == {rid(i) for i in range(3)}


def test_section_requires_summaries(mock_gateway):
    with pytest.raises(ValueError):
        generate_section("x", [], P242, mock_gateway, MODEL)


def test_section_fabrication_detected(tmp_path):
    class FabricatingSection(MockBackend):
        def complete(self, template, bindings, rendered, model, params):
            if template.template_id.startswith("section"):
                return "Beleg ObjectId('ffffffffffffffffffffffff')."
            return super().complete(template, bindings, rendered, model, params)

    gateway = Gateway(FabricatingSection(0), tmp_path / "c")
    with pytest.raises(FabricationError):
        generate_section("x", [(rid(0), "SUMMARY: y")], P242, gateway, MODEL)


def test_merge_keeps_headlines_and_ids(registry, mock_gateway):
    ids = [rid(0), rid(1)]
    drafts = [
        SectionDraft(P242, 0, "Verwirkung",
                     f"Text {render_object_id(ids[0])}.", frozenset({ids[0]})),
        SectionDraft(P242, 1, "Zeitmoment",
                     f"Text {render_object_id(ids[1])}.", frozenset({ids[1]})),
    ]
    commentary = merge_commentary(drafts, registry.text_for(P242), mock_gateway,
                                  MODEL, run_manifest_ref="run-1")
    assert "Verwirkung" in commentary.text and "Zeitmoment" in commentary.text
    assert commentary.cited_record_ids == set(ids)
    assert commentary.source_cluster_indices == (0, 1)
    assert commentary.run_manifest_ref == "run-1"


def test_merge_accepts_dropped_citations(registry, tmp_path):
    kept, dropped = rid(0), rid(1)
    stub = StubMerge(f"Kommentar mit {render_object_id(kept)} allein.")
    gateway = Gateway(stub, tmp_path / "c")
    commentary = merge_commentary(drafts_for([kept, dropped]),
                                  registry.text_for(P242), gateway, MODEL)
    assert commentary.cited_record_ids == {kept}
    assert stub.merge_calls == 1


def test_merge_rejects_fabricated_id_after_one_retry(registry, tmp_path):
    fabricated = render_object_id("f" * 24)
    stub = StubMerge(f"Kommentar mit Beleg {fabricated}.")
    gateway = Gateway(stub, tmp_path / "c")
    with pytest.raises(FabricationError, match="f" * 24):
        merge_commentary(drafts_for([rid(0)]), registry.text_for(P242),
                         gateway, MODEL)
    assert stub.merge_calls == 2


def test_merge_rejects_corrupt_hex_token(registry, tmp_path):
    stub = StubMerge("Kommentar mit Beleg ObjectId('zzz').")
    gateway = Gateway(stub, tmp_path / "c")
    with pytest.raises(FabricationError):
        merge_commentary(drafts_for([rid(0)]), registry.text_for(P242),
                         gateway, MODEL)


def test_merge_rejects_empty_output(registry, tmp_path):
    gateway = Gateway(StubMerge("  \n"), tmp_path / "c")
    with pytest.raises(GatewayError, match="empty commentary"):
        merge_commentary(drafts_for([rid(0)]), registry.text_for(P242),
                         gateway, MODEL)


def commentary_with(text: str) -> Commentary:
    return Commentary(P242, MODEL, text, frozenset(scan_object_ids(text)),
                      (0,), "run-1")


def test_verify_citations_all_resolvable():
    index = store_index(3)
    text = " ".join(f"Satz {render_object_id(r)}." for r in index)
    report = verify_citations(commentary_with(text), index)
    assert report.n_resolvable == 3
    assert report.n_unresolvable == 0
    assert {c.record_id for c in report.resolvable} == set(index)
    assert {(c.decision_id, c.ordinal) for c in report.resolvable} == \
        {("X ZR 2/21", i) for i in range(3)}


def test_verify_citations_corrupt_token_listed_with_excerpt():
    index = store_index(1)
    text = f"Gestützt auf ObjectId('nicht-hex') und {render_object_id(rid(0))}."
    report = verify_citations(commentary_with(text), index)
    assert report.n_resolvable == 1
    assert report.n_unresolvable == 1
    assert report.unresolvable[0].token == "nicht-hex"
    assert "Gestützt auf" in report.unresolvable[0].excerpt


def test_verify_citations_seven_of_which_six_stored():
    index = store_index(6)
    missing = "e" * 24
    tokens = [render_object_id(r) for r in list(index) + [missing]]
    text = " ".join(f"Aussage {t}." for t in tokens)
    report = verify_citations(commentary_with(text), index)
    assert (report.n_resolvable, report.n_unresolvable) == (6, 1)
    assert report.unresolvable[0].token == missing


def test_render_with_footnotes():
    index = store_index(1)
    text = f"Der Senat folgt {render_object_id(rid(0))} im Ergebnis."
    rendered = render_with_footnotes(commentary_with(text), index)
    assert rendered == "Der Senat folgt [X ZR 2/21, para 0] im Ergebnis."
