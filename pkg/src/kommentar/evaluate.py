"""Rubric judging of commentaries and human/LLM score aggregation.

Five criteria, each scored 1-5. The judge model must differ from the
generator model that produced the commentary under evaluation. Report cells
pair a human score with an LLM score; per-model averages across provisions
are rendered to two decimals with the per-column maxima marked.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .gateway import Gateway, ModelId, PromptTemplate, get_template
from .generate import Commentary
from .provisions import ProvisionRef, parse_provision

logger = logging.getLogger(__name__)

CRITERIA = ("topical_relevance", "heading_match", "citation_faithfulness",
            "cluster_distinction", "logical_ordering")

CRITERION_LABELS = {
    "topical_relevance": "Topical Relevance",
    "heading_match": "Heading-Match",
    "citation_faithfulness": "Citation-Faithfulness",
    "cluster_distinction": "Cluster-Distinction",
    "logical_ordering": "Logical Ordering",
}

SOURCES = ("human", "llm")


class ScoreValidationError(ValueError):
    """Judge response or annotation row failed schema validation."""


@dataclass(frozen=True)
class JudgeScore:
    """One scored commentary: five criteria, attributed to a rater source."""

    provision: ProvisionRef
    model: str
    topical_relevance: int
    heading_match: int
    citation_faithfulness: int
    cluster_distinction: int
    logical_ordering: int
    source: str
    judge_model: ModelId | None = None

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ScoreValidationError(f"source must be one of {SOURCES}, "
                                       f"got {self.source!r}")
        if self.source == "llm" and self.judge_model is None:
            raise ScoreValidationError("llm scores must name the judge model")
        for criterion in CRITERIA:
            value = getattr(self, criterion)
            if not isinstance(value, int) or isinstance(value, bool) \
                    or not 1 <= value <= 5:
                raise ScoreValidationError(
                    f"{criterion} must be an integer in [1, 5], got {value!r}")

    def values(self) -> dict[str, int]:
        return {criterion: getattr(self, criterion) for criterion in CRITERIA}


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")


def _normalize_key(key: str) -> str:
    return re.sub(r"[^a-z]", "", key.lower())


_KEY_MAP = {_normalize_key(label): criterion
            for criterion, label in CRITERION_LABELS.items()}
_KEY_MAP.update({_normalize_key(criterion): criterion for criterion in CRITERIA})


def parse_judge_response(text: str) -> dict[str, int]:
    """Tolerant-envelope, strict-value parse of a judge reply.

    Markdown fences and surrounding prose are stripped; key spellings are
    normalized to the five criteria. Exactly five criteria must be present,
    each an integer from 1 to 5.
    """
    cleaned = _FENCE_RE.sub("", text.strip())
    start, end = cleaned.find("{"), cleaned.rfind("}")
    if start < 0 or end <= start:
        raise ScoreValidationError(f"no JSON object in judge response: {text[:120]!r}")
    try:
        raw = json.loads(cleaned[start:end + 1])
    except json.JSONDecodeError as exc:
        raise ScoreValidationError(f"judge response is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScoreValidationError("judge response must be a JSON object")

    scores: dict[str, int] = {}
    for key, value in raw.items():
        criterion = _KEY_MAP.get(_normalize_key(str(key)))
        if criterion is None:
            raise ScoreValidationError(f"unknown criterion {key!r} in judge response")
        if criterion in scores:
            raise ScoreValidationError(f"criterion {key!r} appears twice")
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScoreValidationError(f"{key!r} must be an integer, got {value!r}")
        if not 1 <= value <= 5:
            raise ScoreValidationError(f"{key!r} out of range [1, 5]: {value}")
        scores[criterion] = value
    missing = set(CRITERIA) - set(scores)
    if missing:
        raise ScoreValidationError(f"judge response lacks criteria: {sorted(missing)}")
    return scores


_FORMAT_REMINDER = (
    "Erinnerung: Gib ausschließlich ein JSON-Objekt mit genau den fünf "
    "Kriterien und ganzzahligen Werten von 1 bis 5 zurück.")


def judge(commentary: Commentary, gateway: Gateway, judge_model: ModelId,
          *, language: str = "de") -> JudgeScore:
    """Score one commentary against the rubric; retried exactly once on a
    schema-invalid reply, with a format reminder appended to the prompt."""
    if judge_model == commentary.model:
        raise ScoreValidationError(
            f"judge model {judge_model} was used for generation; "
            "judging requires a separate model")
    template = get_template("judge_rubric", language)
    bindings = {"commentary": commentary.text}
    response = gateway.complete(template, bindings, judge_model)
    try:
        scores = parse_judge_response(response)
    except ScoreValidationError as exc:
        logger.warning("judge reply invalid (%s); reprompting once", exc)
        retry_template = PromptTemplate(
            template_id=template.template_id + "_reprompt",
            body=template.body + "\n\n" + _FORMAT_REMINDER,
            language=template.language)
        response = gateway.complete(retry_template, bindings, judge_model)
        scores = parse_judge_response(response)
    return JudgeScore(provision=commentary.provision, model=commentary.model.name,
                      source="llm", judge_model=judge_model, **scores)


def import_human_scores(path: Path | str) -> list[JudgeScore]:
    """Load annotation rows: provision, model, five integers, annotator id.

    Rows are validated like judge replies; a malformed row is rejected with
    its row number. Duplicate (provision, model) rows keep the last one.
    """
    path = Path(path)
    scores: dict[tuple[str, str], JudgeScore] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row_number, row in enumerate(reader, start=2):
            try:
                provision = parse_provision(row["provision"])
                values = {criterion: int(row[criterion]) for criterion in CRITERIA}
                score = JudgeScore(provision=provision, model=row["model"].strip(),
                                   source="human", **values)
            except (KeyError, TypeError, ValueError) as exc:
                raise ScoreValidationError(f"{path}, row {row_number}: {exc}") from exc
            key = (provision.canonical(), score.model)
            if key in scores:
                logger.warning("%s, row %d: duplicate scores for %s; keeping the "
                               "later row", path, row_number, key)
            scores[key] = score
    return list(scores.values())


# --- report -------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    """Cells keyed (provision canonical, model, criterion) -> {source: score};
    averages keyed (model, criterion, source); per-column argmax sets."""

    cells: dict[tuple[str, str, str], dict[str, int]]
    averages: dict[tuple[str, str, str], float]
    bold_marks: dict[tuple[str, str], set[str]]
    provisions: tuple[str, ...]
    models: tuple[str, ...]


def build_report(scores: list[JudgeScore]) -> EvaluationReport:
    """Aggregate scores into per-provision cells plus cross-provision averages.

    Averages only cover provisions where a score exists; no imputation.
    The argmax set per (criterion, source) column is computed on averages
    rounded to two decimals, matching what the rendering shows.
    """
    cells: dict[tuple[str, str, str], dict[str, int]] = {}
    provisions: list[str] = []
    models: list[str] = []
    for score in scores:
        provision = score.provision.canonical()
        if provision not in provisions:
            provisions.append(provision)
        if score.model not in models:
            models.append(score.model)
        for criterion, value in score.values().items():
            cells.setdefault((provision, score.model, criterion), {})[score.source] = value

    averages: dict[tuple[str, str, str], float] = {}
    for model in models:
        for criterion in CRITERIA:
            for source in SOURCES:
                values = [cells[(p, model, criterion)][source]
                          for p in provisions
                          if source in cells.get((p, model, criterion), {})]
                if values:
                    averages[(model, criterion, source)] = sum(values) / len(values)

    bold_marks: dict[tuple[str, str], set[str]] = {}
    for criterion in CRITERIA:
        for source in SOURCES:
            column = {m: round(averages[(m, criterion, source)], 2)
                      for m in models if (m, criterion, source) in averages}
            if column:
                top = max(column.values())
                bold_marks[(criterion, source)] = {m for m, v in column.items()
                                                   if v == top}
    return EvaluationReport(cells=cells, averages=averages, bold_marks=bold_marks,
                            provisions=tuple(provisions), models=tuple(models))


def _cell_text(cell: dict[str, int] | None) -> str:
    if not cell:
        return "–"
    human = cell.get("human")
    llm = cell.get("llm")
    return f"{human if human is not None else '–'} | {llm if llm is not None else '–'}"


def render_report_text(report: EvaluationReport) -> str:
    """Text rendering: one block per provision plus the averages block,
    each cell in 'human | LLM' form, column maxima marked with *."""
    headers = [CRITERION_LABELS[c] for c in CRITERIA]
    widths = [max(len(h), 13) for h in headers]
    model_width = max((len(m) for m in report.models), default=5)

    def row(label: str, cells: list[str]) -> str:
        padded = [c.center(w) for c, w in zip(cells, widths)]
        return "  ".join([label.ljust(model_width)] + padded)

    lines: list[str] = []
    for provision in report.provisions:
        lines.append(provision)
        lines.append(row("Model", headers))
        for model in report.models:
            cells = [_cell_text(report.cells.get((provision, model, criterion)))
                     for criterion in CRITERIA]
            lines.append(row(model, cells))
        lines.append("")

    lines.append("Average score across legal provisions")
    lines.append(row("Model", headers))
    for model in report.models:
        cells = []
        for criterion in CRITERIA:
            parts = []
            for source in SOURCES:
                value = report.averages.get((model, criterion, source))
                if value is None:
                    parts.append("–")
                    continue
                text = f"{value:.2f}"
                if model in report.bold_marks.get((criterion, source), set()):
                    text = f"*{text}*"
                parts.append(text)
            cells.append(" | ".join(parts))
        lines.append(row(model, cells))
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvaluationReport) -> dict:
    """Machine-readable form of the full report."""
    return {
        "provisions": list(report.provisions),
        "models": list(report.models),
        "cells": [
            {"provision": p, "model": m, "criterion": c, **scores}
            for (p, m, c), scores in sorted(report.cells.items())
        ],
        "averages": [
            {"model": m, "criterion": c, "source": s, "mean": round(v, 2)}
            for (m, c, s), v in sorted(report.averages.items())
        ],
        "bold_marks": [
            {"criterion": c, "source": s, "models": sorted(models)}
            for (c, s), models in sorted(report.bold_marks.items())
        ],
    }
