import json

import numpy as np

from kommentar.gateway import ModelId, PromptTemplate
from kommentar.mock_backend import IRRELEVANCE_SENTINEL, MockBackend, mock_backend

MODEL = ModelId("openai", "gpt-4o")
EMBED = ModelId("openai", "text-embedding-3-large")

SUMMARIZE = PromptTemplate("summarize", "{{chunk}} {{irrelevance_sentinel}}")
KEYWORD = PromptTemplate("keyword", "{{summary}}")
HEADLINE = PromptTemplate("headline", "{{keywords}}")
MERGE = PromptTemplate("merge_commentary", "{{normtext}} {{draft}}")
JUDGE = PromptTemplate("judge_rubric", "{{commentary}}")


def complete(backend, template, **bindings):
    return backend.complete(template, bindings, template.render(bindings),
                            MODEL, {})


def test_factory_and_determinism():
    a, b = mock_backend(7), mock_backend(7)
    assert complete(a, KEYWORD, summary="Verwirkung eines Anspruchs") == \
        complete(b, KEYWORD, summary="Verwirkung eines Anspruchs")


def test_summarize_takes_first_sentence():
    backend = MockBackend(42)
    out = complete(backend, SUMMARIZE,
                   chunk="Der Anspruch besteht. Die Revision bleibt ohne Erfolg.",
                   irrelevance_sentinel=IRRELEVANCE_SENTINEL)
    assert out == "SUMMARY: Der Anspruch besteht."


def test_summarize_emits_sentinel_for_marked_chunk():
    backend = MockBackend(42)
    out = complete(backend, SUMMARIZE,
                   chunk="##OFFTOPIC## Dieser Absatz betrifft nur die Kosten.",
                   irrelevance_sentinel=IRRELEVANCE_SENTINEL)
    assert out == IRRELEVANCE_SENTINEL


def test_keyword_frequency_rule():
    backend = MockBackend(42)
    out = complete(backend, KEYWORD,
                   summary="SUMMARY: the duty of care was breached twice by duty holder")
    assert out == "duty breached"


def test_keyword_degenerate_single_token():
    backend = MockBackend(42)
    assert complete(backend, KEYWORD, summary="restitution") == "restitution"


def test_keyword_preserves_marker_case():
    backend = MockBackend(42)
    out = complete(backend, KEYWORD,
                   summary="SUMMARY: CLUSTER9x1: CLUSTER9x1: CLUSTER9x1: Verwirkung "
                           "Verwirkung liegt vor.")
    assert out == "CLUSTER9x1 Verwirkung"


def test_headline_deduplicates_keywords():
    backend = MockBackend(42)
    out = complete(backend, HEADLINE,
                   keywords="\n".join("- Verwirkung" for _ in range(5)))
    assert out == "Verwirkung"
    out = complete(backend, HEADLINE, keywords="- a\n- b\n- a\n- c\n- b")
    assert out == "a / b / c"


def test_merge_preserves_object_ids():
    backend = MockBackend(42)
    token = "ObjectId('aaaaaaaaaaaaaaaaaaaaaaaa')"
    out = complete(backend, MERGE, normtext="§ 242 BGB Treu und Glauben\nText.",
                   draft=f"Abschnitt mit Beleg {token}.")
    assert token in out
    assert out.startswith("§ 242 BGB")


def test_judge_returns_valid_score_json():
    backend = MockBackend(42)
    out = complete(backend, JUDGE, commentary="Ein Kommentartext.")
    scores = json.loads(out)
    assert len(scores) == 5
    assert all(isinstance(v, int) and 1 <= v <= 5 for v in scores.values())


def test_embedding_unit_norm_and_determinism():
    backend = MockBackend(42)
    a = backend.embed("irgendein Schlagwort", EMBED)
    b = backend.embed("irgendein Schlagwort", EMBED)
    assert a == b
    assert len(a) == MockBackend.dim
    assert abs(np.linalg.norm(a) - 1.0) < 1e-9


def test_marker_texts_share_direction():
    backend = MockBackend(42)
    sims = []
    for i in range(1000):
        a = np.array(backend.embed(f"CLUSTER1: erster Text {i}", EMBED))
        b = np.array(backend.embed(f"CLUSTER1: zweiter Text {i}", EMBED))
        sims.append(float(a @ b))
    assert min(sims) >= 0.9


def test_distinct_markers_are_separable():
    backend = MockBackend(42)
    a = np.array(backend.embed("CLUSTER1: x", EMBED))
    b = np.array(backend.embed("CLUSTER2: x", EMBED))
    c = np.array(backend.embed("völlig anderes Thema", EMBED))
    assert abs(float(a @ b)) < 0.5
    assert abs(float(a @ c)) < 0.5
