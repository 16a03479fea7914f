"""Deterministic offline backend.

Completions are synthesized template-aware from the prompt bindings, and
embeddings are pseudo-random unit vectors derived from a digest of
(seed, text). Everything is a pure function of the constructor seed and the
inputs, so a full pipeline run on this backend is bit-reproducible.

Embedding geometry: texts starting with a marker token ``CLUSTER<k>`` (colon
optional) are placed near a per-marker direction with pairwise cosine
similarity well above 0.9, while unmarked texts land at independent random
directions. Tests use the markers to construct separable groups.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter

import numpy as np

from .gateway import ModelId, PromptTemplate

MOCK_EMBEDDING_DIM = 64
IRRELEVANCE_SENTINEL = "IRRELEVANT"

# Fixture chunks containing this marker are summarized as off-topic.
DEFAULT_IRRELEVANCE_MARKER = "##OFFTOPIC##"

_MARKER_RE = re.compile(r"^\s*(CLUSTER\w+)\b")
_SENTENCE_RE = re.compile(r".*?[.!?](?=\s|$)", re.DOTALL)
_PUNCT = "\"'.,;:!?()[]{}«»„“”‚‘’"

_STOPWORDS = frozenset("""
a an the of to in on at by for with and or but is are was were be been it its
this that these those as from not no
der die das des dem den ein eine einem einen einer eines und oder nicht kein
im in an auf aus bei mit nach von vor zu zur zum für über unter als auch ist
sind war waren wird werden wurde wurden hat haben sich dass daß wenn weil es
sie er wir ihr man nur noch schon so wie bereits dabei dazu dieser diese dieses
""".split())

_JUDGE_FIELDS = ("Topical Relevance", "Heading-Match", "Citation-Faithfulness",
                 "Cluster-Distinction", "Logical Ordering")


def _first_sentence(text: str) -> str:
    text = text.strip()
    m = _SENTENCE_RE.match(text)
    return m.group(0).strip() if m else text


class MockBackend:
    """Offline stand-in for completion and embedding providers."""

    dim = MOCK_EMBEDDING_DIM

    def __init__(self, seed: int, *,
                 irrelevance_marker: str = DEFAULT_IRRELEVANCE_MARKER):
        self.seed = seed
        self.irrelevance_marker = irrelevance_marker
        self.invocations = 0

    # -- completions ----------------------------------------------------------

    def complete(self, template: PromptTemplate, bindings: dict, rendered: str,
                 model: ModelId, params: dict) -> str:
        self.invocations += 1
        tid = template.template_id
        if tid.startswith("summarize"):
            return self._summarize(bindings)
        if tid.startswith("keyword"):
            return self._keyword(bindings)
        if tid.startswith("headline"):
            return self._headline(bindings)
        if tid.startswith("section"):
            return f"{bindings['headline']}\n\n{bindings['summaries']}"
        if tid.startswith("merge_commentary"):
            normtext_heading = bindings["normtext"].splitlines()[0]
            return f"{normtext_heading}\n\n{bindings['draft']}"
        if tid.startswith("judge_rubric"):
            return self._judge(bindings.get("commentary", rendered))
        return f"MOCK:{self._digest(rendered)[:16]}"

    def _summarize(self, bindings: dict) -> str:
        chunk = bindings["chunk"]
        if self.irrelevance_marker in chunk:
            return bindings.get("irrelevance_sentinel", IRRELEVANCE_SENTINEL)
        return f"SUMMARY: {_first_sentence(chunk)}"

    def _keyword(self, bindings: dict) -> str:
        """The two most frequent non-stopword tokens of the summary.

        Frequencies are counted on lowercased, punctuation-stripped tokens;
        ties break alphabetically; the output keeps each token's original
        casing so marker tokens survive.
        """
        body = bindings["summary"].strip()
        body = body.removeprefix("SUMMARY:").strip()
        counts: Counter[str] = Counter()
        originals: dict[str, str] = {}
        for token in body.split():
            stripped = token.strip(_PUNCT)
            norm = stripped.lower()
            if not norm or norm in _STOPWORDS:
                continue
            counts[norm] += 1
            originals.setdefault(norm, stripped)
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        return " ".join(originals[t] for t in ranked[:2])

    def _headline(self, bindings: dict) -> str:
        keywords = []
        for line in bindings["keywords"].splitlines():
            keyword = line.strip().removeprefix("- ").strip()
            if keyword and keyword not in keywords:
                keywords.append(keyword)
        return " / ".join(keywords)

    def _judge(self, commentary: str) -> str:
        digest = hashlib.sha256(
            f"{self.seed}:judge:{commentary}".encode("utf-8")).digest()
        scores = {name: 1 + digest[i] % 5 for i, name in enumerate(_JUDGE_FIELDS)}
        return json.dumps(scores, ensure_ascii=False)

    # -- embeddings -----------------------------------------------------------

    def embed(self, text: str, model: ModelId) -> list[float]:
        self.invocations += 1
        marker = _MARKER_RE.match(text)
        if marker:
            base = self._unit(f"marker:{marker.group(1)}")
            jitter = self._unit(f"text:{text}")
            vector = base + 0.2 * jitter
            vector /= np.linalg.norm(vector)
            return vector.tolist()
        return self._unit(f"text:{text}").tolist()

    def _digest(self, payload: str) -> str:
        return hashlib.sha256(f"{self.seed}:{payload}".encode("utf-8")).hexdigest()

    def _unit(self, label: str) -> np.ndarray:
        rng_seed = int.from_bytes(
            hashlib.sha256(f"{self.seed}:{label}".encode("utf-8")).digest()[:8], "big")
        v = np.random.default_rng(rng_seed).standard_normal(self.dim)
        return v / np.linalg.norm(v)


def mock_backend(seed: int) -> MockBackend:
    """Deterministic backend handle for offline runs."""
    return MockBackend(seed)
