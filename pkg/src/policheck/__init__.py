"""Multi-policy compliance evaluation for AI system documentation."""

from pathlib import Path

from .aggregate import ComplianceReport, HeatmapMatrix, build_heatmap, build_report, filter_issues
from .engine import (
    Batch,
    ComparisonPair,
    EngineConfig,
    EvaluationRecord,
    ResultDataset,
    cluster_articles,
    evaluate_run,
    plan_batches,
)
from .gateway import (
    ExpectedFormat,
    LlmProvider,
    MockProvider,
    ProviderConfig,
    ProviderRequest,
    RateConfig,
    UsageLedger,
    compute_cost,
    parse_score_table,
)
from .model_card import ModelCard, SectionId, ValidationReport, parse_model_card
from .policy import PolicyDocument, PolicyPackage, load_package, save_package, structure_policy
from .relevancy import RelevancyMap, Thresholds, kept_pairs, score_relevance

__version__ = "0.1.0"


def fixture_path(name: str) -> Path:
    """Path to a bundled fixture file (demo card, mini policies, ratings)."""
    return Path(__file__).parent / "fixtures" / name

__all__ = [
    "Batch",
    "ComparisonPair",
    "ComplianceReport",
    "EngineConfig",
    "EvaluationRecord",
    "ExpectedFormat",
    "HeatmapMatrix",
    "LlmProvider",
    "MockProvider",
    "ModelCard",
    "PolicyDocument",
    "PolicyPackage",
    "ProviderConfig",
    "ProviderRequest",
    "RateConfig",
    "RelevancyMap",
    "ResultDataset",
    "SectionId",
    "Thresholds",
    "UsageLedger",
    "ValidationReport",
    "build_heatmap",
    "build_report",
    "cluster_articles",
    "compute_cost",
    "evaluate_run",
    "filter_issues",
    "kept_pairs",
    "load_package",
    "parse_model_card",
    "parse_score_table",
    "plan_batches",
    "save_package",
    "score_relevance",
    "structure_policy",
]
