from __future__ import annotations

import pytest

from policheck import fixture_path
from policheck.gateway import GatewaySession, MockProvider
from policheck.model_card import ModelCard, parse_model_card
from policheck.policy import PolicyDocument, PolicyPackage, structure_policy
from policheck.relevancy import RelevanceCell, RelevancyMap, score_relevance
from policheck.model_card import SECTION_ORDER


@pytest.fixture(scope="session")
def crop_card() -> ModelCard:
    card = parse_model_card(fixture_path("card_crop_monitor.md").read_text(encoding="utf-8"))
    assert isinstance(card, ModelCard)
    return card


@pytest.fixture(scope="session")
def harvest_card() -> ModelCard:
    card = parse_model_card(fixture_path("card_harvest_insight.md").read_text(encoding="utf-8"))
    assert isinstance(card, ModelCard)
    return card


@pytest.fixture(scope="session")
def adaa_doc() -> PolicyDocument:
    return structure_policy(
        fixture_path("policy_adaa.txt").read_text(encoding="utf-8"),
        "ADAA",
        "Automated Decision Accountability Act",
        "Canada (synthetic)",
    )


@pytest.fixture(scope="session")
def atc_doc() -> PolicyDocument:
    return structure_policy(
        fixture_path("policy_atc.txt").read_text(encoding="utf-8"),
        "ATC",
        "Algorithmic Transparency Code",
        "EU (synthetic)",
    )


@pytest.fixture(scope="session")
def fixture_packages(crop_card, harvest_card, adaa_doc, atc_doc) -> list[PolicyPackage]:
    session = GatewaySession(MockProvider())
    cards = [crop_card, harvest_card]
    return [
        PolicyPackage(document=adaa_doc, relevancy=score_relevance(cards, adaa_doc, session)),
        PolicyPackage(document=atc_doc, relevancy=score_relevance(cards, atc_doc, session)),
    ]


def make_map(
    policy_id: str,
    articles: list[str],
    scores_fn,
    **kwargs,
) -> RelevancyMap:
    """Full-coverage relevancy map with per-cell scores from scores_fn(section, article)."""
    cells = {}
    for article in articles:
        for section in SECTION_ORDER:
            scores = scores_fn(section, article)
            cells[(section, article)] = RelevanceCell(
                section=section, article=article, scores=list(scores),
                unscored=not scores,
            )
    return RelevancyMap(
        policy_id=policy_id, article_order=tuple(articles), cells=cells, **kwargs
    )
