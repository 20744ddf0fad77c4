"""Relevance scoring of (card section, policy article) pairs.

Each pair is scored 0-5 once per calibration card; the per-pair mean drives
the skip filter (mean <= skip_threshold) and the sample standard deviation
across cards drives the manual-review flag. Flagged pairs are never
auto-skipped, and pairs left unscored by provider failures stay kept:
a false keep costs tokens, a false skip silently loses coverage.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import CorruptPackage, MalformedResponse, ProviderError
from .gateway import ExpectedFormat, GatewaySession, ProviderRequest, parse_score_table
from .model_card import SECTION_ORDER, ModelCard, SectionId
from .prompts import relevance_prompt

if TYPE_CHECKING:
    from .policy import PolicyDocument

SCORING_RETRIES = 3


@dataclass(frozen=True)
class Thresholds:
    skip: float = 1.0
    variance: float = 1.5


@dataclass
class RelevanceCell:
    """Scores for one (section, article) pair across calibration cards."""

    section: SectionId
    article: str
    scores: list[int] = field(default_factory=list)
    unscored: bool = False

    def __post_init__(self) -> None:
        for s in self.scores:
            if not 0 <= s <= 5:
                raise ValueError(f"relevance score out of range: {s}")

    @property
    def mean(self) -> float | None:
        if not self.scores:
            return None
        return sum(self.scores) / len(self.scores)

    @property
    def stdev(self) -> float:
        if len(self.scores) < 2:
            return 0.0
        m = sum(self.scores) / len(self.scores)
        return math.sqrt(sum((s - m) ** 2 for s in self.scores) / (len(self.scores) - 1))

    @property
    def variance(self) -> float:
        return self.stdev**2

    def skip(self, thresholds: Thresholds) -> bool:
        if not self.scores:
            return False
        return sum(self.scores) <= thresholds.skip * len(self.scores)

    def flagged_for_review(self, thresholds: Thresholds) -> bool:
        return self.stdev >= thresholds.variance


@dataclass
class RelevancyMap:
    """Per-pair relevance cells plus the thresholds that interpret them."""

    policy_id: str
    article_order: tuple[str, ...]
    cells: dict[tuple[SectionId, str], RelevanceCell]
    calibration_card_ids: tuple[str, ...] = ()
    thresholds: Thresholds = field(default_factory=Thresholds)

    def cell(self, section: SectionId, article: str) -> RelevanceCell:
        return self.cells[(section, article)]

    def iter_cells(self):
        """Cells in (article document order, section schema order)."""
        known = set(self.article_order)
        extra = [a for (_, a) in self.cells if a not in known]
        order = list(self.article_order) + sorted(dict.fromkeys(extra))
        for article in order:
            for section in SECTION_ORDER:
                cell = self.cells.get((section, article))
                if cell is not None:
                    yield cell

    def counts(self) -> dict[str, int]:
        total = len(self.cells)
        skipped = sum(1 for c in self.cells.values() if c.skip(self.thresholds))
        flagged = sum(1 for c in self.cells.values() if c.flagged_for_review(self.thresholds))
        unscored = sum(1 for c in self.cells.values() if c.unscored)
        return {
            "total": total,
            "kept": total - skipped,
            "skipped": skipped,
            "flagged_for_review": flagged,
            "unscored": unscored,
        }

    def reduction_percent(self) -> float:
        counts = self.counts()
        if counts["total"] == 0:
            return 0.0
        return 100.0 * counts["skipped"] / counts["total"]


def kept_pairs(rmap: RelevancyMap) -> list[tuple[SectionId, str]]:
    """Pairs with skip == False, in (article, section) order."""
    return [
        (cell.section, cell.article)
        for cell in rmap.iter_cells()
        if not cell.skip(rmap.thresholds)
    ]


def skipped_pairs(rmap: RelevancyMap) -> list[tuple[SectionId, str]]:
    return [
        (cell.section, cell.article)
        for cell in rmap.iter_cells()
        if cell.skip(rmap.thresholds)
    ]


def validate_coverage(rmap: RelevancyMap, document: "PolicyDocument") -> None:
    """The map must cover exactly sections x articles of this document."""
    numbers = document.article_numbers()
    if list(rmap.article_order) != numbers:
        raise CorruptPackage(
            f"{rmap.policy_id}: relevancy article order does not match document"
        )
    expected = {(s, a) for a in numbers for s in SECTION_ORDER}
    actual = set(rmap.cells)
    missing = expected - actual
    extra = actual - expected
    if missing or extra:
        raise CorruptPackage(
            f"{rmap.policy_id}: relevancy coverage mismatch "
            f"({len(missing)} missing, {len(extra)} extra cells)"
        )


def score_relevance(
    cards: list[ModelCard],
    document: "PolicyDocument",
    session: GatewaySession,
    thresholds: Thresholds = Thresholds(),
    parallelism: int = 4,
) -> RelevancyMap:
    """Score every pair once per calibration card and fold into a map.

    One request covers all 23 sections against a single article, so distinct
    (card, article) requests can run concurrently. A request that stays
    unparseable after retries leaves its cells without that card's score;
    cells with no scores at all are marked unscored and remain kept.
    """
    if not cards:
        raise ValueError("at least one calibration card is required")
    document.validate()

    cells: dict[tuple[SectionId, str], RelevanceCell] = {
        (section, article.number): RelevanceCell(section=section, article=article.number)
        for article in document.articles
        for section in SECTION_ORDER
    }

    jobs = [(card, article) for card in cards for article in document.articles]

    def run_job(job: tuple[ModelCard, object]) -> tuple[str, dict[SectionId, int] | None]:
        card, article = job
        section_pairs = [(s.value, card.sections[s]) for s in SECTION_ORDER]
        request = ProviderRequest(
            cached_context=card.to_text(),
            task_prompt=relevance_prompt(
                article.number, document.article_text(article.number), section_pairs
            ),
            expected_format=ExpectedFormat.SCORE_TABLE,
        )
        for _ in range(SCORING_RETRIES):
            try:
                result = session.complete(request, document.policy_id, phase="relevancy")
                rows = parse_score_table(result.text)
                by_name = {row.article: row.score for row in rows}
                scores = {}
                for section in SECTION_ORDER:
                    if section.value not in by_name:
                        raise MalformedResponse(f"missing row for section {section.value!r}")
                    scores[section] = max(0, min(5, by_name[section.value]))
                return article.number, scores
            except (MalformedResponse, ProviderError):
                continue
        return article.number, None

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(run_job, jobs))

    for article_number, scores in results:
        if scores is None:
            continue
        for section, score in scores.items():
            cells[(section, article_number)].scores.append(score)

    for cell in cells.values():
        if not cell.scores:
            cell.unscored = True

    return RelevancyMap(
        policy_id=document.policy_id,
        article_order=tuple(document.article_numbers()),
        cells=cells,
        calibration_card_ids=tuple(card.card_id for card in cards),
        thresholds=thresholds,
    )


# --- serialization ---------------------------------------------------------


def relevancy_to_dict(rmap: RelevancyMap) -> dict:
    """Serializable form. Derived values ride along rounded for readability;
    loaders recompute them from the raw scores."""
    rows = []
    for cell in rmap.iter_cells():
        rows.append(
            {
                "section": cell.section.value,
                "article": cell.article,
                "scores": list(cell.scores),
                "unscored": cell.unscored,
                "mean": None if cell.mean is None else round(cell.mean, 4),
                "stdev": round(cell.stdev, 4),
                "skip": cell.skip(rmap.thresholds),
                "flagged_for_review": cell.flagged_for_review(rmap.thresholds),
            }
        )
    return {
        "schema_version": 1,
        "policy_id": rmap.policy_id,
        "calibration_card_ids": list(rmap.calibration_card_ids),
        "thresholds": {
            "skip_threshold": rmap.thresholds.skip,
            "variance_threshold": rmap.thresholds.variance,
        },
        "article_order": list(rmap.article_order),
        "cells": rows,
    }


def relevancy_from_dict(data: dict) -> RelevancyMap:
    thresholds = Thresholds(
        skip=float(data["thresholds"]["skip_threshold"]),
        variance=float(data["thresholds"]["variance_threshold"]),
    )
    cells: dict[tuple[SectionId, str], RelevanceCell] = {}
    for row in data["cells"]:
        section = SectionId(row["section"])
        cell = RelevanceCell(
            section=section,
            article=row["article"],
            scores=[int(s) for s in row["scores"]],
            unscored=bool(row.get("unscored", False)),
        )
        cells[(section, cell.article)] = cell
    return RelevancyMap(
        policy_id=data["policy_id"],
        article_order=tuple(data["article_order"]),
        cells=cells,
        calibration_card_ids=tuple(data.get("calibration_card_ids", ())),
        thresholds=thresholds,
    )
