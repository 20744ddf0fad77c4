"""Fold a result dataset into report layers: overall and per-policy
summaries, the section-wise issues/fixes table, and per-policy heatmaps.

Issue tables and every number in the report are computed locally from the
dataset; the provider only writes narrative prose around them, so a
hallucinated figure cannot enter the structured output. Provider failures
downgrade to placeholder narratives and never fail the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine import EngineConfig, EvaluationRecord, ResultDataset
from .errors import ProviderError, UnknownPolicy
from .gateway import (
    ContextCache,
    ExpectedFormat,
    GatewaySession,
    LlmProvider,
    ProviderRequest,
)
from .model_card import SECTION_ORDER, ModelCard, SectionId
from .policy import PolicyDocument
from .prompts import fixes_prompt, summary_prompt

NARRATIVE_PLACEHOLDER = "[narrative unavailable: provider error; tables below are complete]"
NO_PAIRS_NARRATIVE = "No evaluable pairs: every comparison was filtered out or the run is empty."

# 6 ordinal score bins (green -> red) plus neutral states.
COLOR_BINS = {
    "0": "#1a9850",
    "1": "#91cf60",
    "2": "#d9ef8b",
    "3": "#fee08b",
    "4": "#fc8d59",
    "5": "#d73027",
    "skipped": "#d0d0d0",
    "unscored": "#8a8a8a",
}


@dataclass(frozen=True)
class HeatmapCell:
    state: str  # "scored" | "skipped" | "unscored"
    score: int | None = None
    rationale: str | None = None

    def to_dict(self) -> dict:
        return {"state": self.state, "score": self.score, "rationale": self.rationale}


@dataclass
class HeatmapMatrix:
    policy_id: str
    rows: list[str]           # 23 section names, schema order
    cols: list[str]           # article numbers, document order
    cells: list[list[HeatmapCell]]

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "rows": self.rows,
            "cols": self.cols,
            "cells": [[c.to_dict() for c in row] for row in self.cells],
            "legend": COLOR_BINS,
        }


@dataclass(frozen=True)
class IssueItem:
    policy_id: str
    article: str
    score: int
    rationale: str | None
    record_id: str

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "article": self.article,
            "score": self.score,
            "rationale": self.rationale,
            "record_id": self.record_id,
        }


@dataclass
class IssueFixRow:
    section: SectionId
    original_content: str
    issues: list[IssueItem] = field(default_factory=list)
    fixes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "section": self.section.value,
            "category": self.section.category,
            "original_content": self.original_content,
            "issues": [i.to_dict() for i in self.issues],
            "fixes": list(self.fixes),
        }


@dataclass(frozen=True)
class PriorityRow:
    """One article's aggregate standing in an issue table."""

    policy_id: str
    article: str
    max_score: int
    pair_count: int
    record_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "article": self.article,
            "max_score": self.max_score,
            "pair_count": self.pair_count,
            "record_ids": list(self.record_ids),
        }


@dataclass
class ComplianceReport:
    run_id: str
    policy_ids: tuple[str, ...]
    overall_narrative: str
    overall_top_issues: list[PriorityRow]
    policy_narratives: dict[str, str]
    policy_issues: dict[str, list[PriorityRow]]
    issue_fix_rows: list[IssueFixRow]
    heatmaps: dict[str, HeatmapMatrix]
    issue_threshold: int
    ledger_snapshot: dict

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "policy_ids": list(self.policy_ids),
            "overall": {
                "narrative": self.overall_narrative,
                "top_issues": [r.to_dict() for r in self.overall_top_issues],
            },
            "policies": {
                pid: {
                    "narrative": self.policy_narratives[pid],
                    "issues": [r.to_dict() for r in self.policy_issues[pid]],
                }
                for pid in self.policy_ids
            },
            "sections": [row.to_dict() for row in self.issue_fix_rows],
            "heatmaps": {pid: hm.to_dict() for pid, hm in self.heatmaps.items()},
            "issue_threshold": self.issue_threshold,
            "ledger": self.ledger_snapshot,
        }


def build_heatmap(dataset: ResultDataset, document: PolicyDocument) -> HeatmapMatrix:
    """23 x article_count matrix; skipped pairs render as their own state,
    never as score 0."""
    cols = document.article_numbers()
    col_index = {a: i for i, a in enumerate(cols)}
    grid: list[list[HeatmapCell | None]] = [
        [None] * len(cols) for _ in range(len(SECTION_ORDER))
    ]
    row_index = {s: i for i, s in enumerate(SECTION_ORDER)}

    for record in dataset.records_for(document.policy_id):
        r, c = row_index[record.pair.section], col_index[record.pair.article]
        if record.violation_score is None:
            grid[r][c] = HeatmapCell(state="unscored")
        else:
            grid[r][c] = HeatmapCell(
                state="scored", score=record.violation_score, rationale=record.description
            )
    for pair in dataset.skipped_for(document.policy_id):
        grid[row_index[pair.section]][col_index[pair.article]] = HeatmapCell(state="skipped")

    holes = sum(1 for row in grid for cell in row if cell is None)
    if holes:
        raise ValueError(f"{document.policy_id}: dataset does not cover the policy ({holes} holes)")

    return HeatmapMatrix(
        policy_id=document.policy_id,
        rows=[s.value for s in SECTION_ORDER],
        cols=cols,
        cells=[[cell for cell in row if cell is not None] for row in grid],
    )


def _issue_records(records: list[EvaluationRecord], threshold: int) -> list[EvaluationRecord]:
    return [
        r for r in records if r.violation_score is not None and r.violation_score >= threshold
    ]


def priority_table(
    records: list[EvaluationRecord],
    threshold: int,
    article_order: dict[str, dict[str, int]],
) -> list[PriorityRow]:
    """Group issue records by (policy, article); sort by severity, breadth,
    then document order."""
    grouped: dict[tuple[str, str], list[EvaluationRecord]] = {}
    for record in _issue_records(records, threshold):
        grouped.setdefault((record.pair.policy_id, record.pair.article), []).append(record)

    rows = [
        PriorityRow(
            policy_id=pid,
            article=article,
            max_score=max(r.violation_score for r in group),  # type: ignore[arg-type]
            pair_count=len(group),
            record_ids=tuple(sorted(r.record_id for r in group)),
        )
        for (pid, article), group in grouped.items()
    ]
    rows.sort(
        key=lambda r: (
            -r.max_score,
            -r.pair_count,
            r.policy_id,
            article_order.get(r.policy_id, {}).get(r.article, 0),
        )
    )
    return rows


def _priority_markdown(rows: list[PriorityRow]) -> str:
    lines = ["| Policy | Article | Max Score | Affected Pairs |", "| --- | --- | --- | --- |"]
    for row in rows:
        lines.append(f"| {row.policy_id} | {row.article} | {row.max_score} | {row.pair_count} |")
    return "\n".join(lines)


def _issue_markdown(issues: list[IssueItem]) -> str:
    lines = ["| Policy | Article | Score | Rationale |", "| --- | --- | --- | --- |"]
    for issue in issues:
        rationale = (issue.rationale or "").replace("|", "\\|")
        lines.append(f"| {issue.policy_id} | {issue.article} | {issue.score} | {rationale} |")
    return "\n".join(lines)


def _narrative(session: GatewaySession | None, prompt: str, policy_id: str) -> str:
    if session is None:
        return NARRATIVE_PLACEHOLDER
    request = ProviderRequest(
        cached_context="", task_prompt=prompt, expected_format=ExpectedFormat.SUMMARY_TEXT
    )
    try:
        return session.complete(request, policy_id, phase="summary").text
    except ProviderError:
        return NARRATIVE_PLACEHOLDER


def summarize(
    dataset: ResultDataset,
    session: GatewaySession | None,
    level: str,
    documents: dict[str, PolicyDocument],
    threshold: int = 2,
) -> tuple[dict[str, str], dict[str, list[PriorityRow]]]:
    """Narratives plus deterministic issue tables for one report layer.

    level: "overall" or "policy". Returns ({scope: narrative}, {scope: rows}).
    """
    article_order = {pid: doc.article_index() for pid, doc in documents.items()}
    if level == "overall":
        rows = priority_table(dataset.records, threshold, article_order)
        if not dataset.records and not dataset.skipped:
            return {"overall": NO_PAIRS_NARRATIVE}, {"overall": rows}
        prompt = summary_prompt(
            f"the full run across policies {', '.join(dataset.policy_ids)}",
            _priority_markdown(rows),
        )
        return {"overall": _narrative(session, prompt, "_overall")}, {"overall": rows}

    if level == "policy":
        narratives: dict[str, str] = {}
        tables: dict[str, list[PriorityRow]] = {}
        for pid in dataset.policy_ids:
            rows = priority_table(dataset.records_for(pid), threshold, article_order)
            tables[pid] = rows
            prompt = summary_prompt(f"policy {pid}", _priority_markdown(rows))
            narratives[pid] = _narrative(session, prompt, pid)
        return narratives, tables

    raise ValueError(f"unknown summary level: {level!r}")


def build_issue_fix_rows(
    dataset: ResultDataset,
    card: ModelCard,
    session: GatewaySession | None,
    threshold: int = 2,
) -> list[IssueFixRow]:
    """One row per card section (schema order); zero-issue rows keep their
    content and an empty issue list."""
    by_section: dict[SectionId, list[IssueItem]] = {s: [] for s in SECTION_ORDER}
    for record in _issue_records(dataset.records, threshold):
        by_section[record.pair.section].append(
            IssueItem(
                policy_id=record.pair.policy_id,
                article=record.pair.article,
                score=record.violation_score,  # type: ignore[arg-type]
                rationale=record.description,
                record_id=record.record_id,
            )
        )

    rows = []
    for section in SECTION_ORDER:
        issues = sorted(
            by_section[section], key=lambda i: (-i.score, i.policy_id, i.article)
        )
        fixes: list[str] = []
        if issues:
            prompt = fixes_prompt(section.value, card.sections[section], _issue_markdown(issues))
            text = _narrative(session, prompt, "_sections")
            fixes = [
                line[2:].strip() for line in text.splitlines() if line.startswith("- ")
            ] or [text]
        rows.append(
            IssueFixRow(
                section=section,
                original_content=card.sections[section],
                issues=issues,
                fixes=fixes,
            )
        )
    return rows


def build_report(
    card: ModelCard,
    documents: dict[str, PolicyDocument],
    dataset: ResultDataset,
    provider: LlmProvider | None,
    config: EngineConfig = EngineConfig(),
) -> ComplianceReport:
    """Assemble the full report; extends the dataset's ledger with the
    summary-phase usage."""
    session = None
    if provider is not None:
        session = GatewaySession(provider, ledger=dataset.ledger, cache=ContextCache())

    overall_narr, overall_rows = summarize(
        dataset, session, "overall", documents, config.issue_threshold
    )
    policy_narr, policy_rows = summarize(
        dataset, session, "policy", documents, config.issue_threshold
    )
    issue_rows = build_issue_fix_rows(dataset, card, session, config.issue_threshold)
    heatmaps = {
        pid: build_heatmap(dataset, documents[pid]) for pid in dataset.policy_ids
    }

    return ComplianceReport(
        run_id=dataset.run_id,
        policy_ids=dataset.policy_ids,
        overall_narrative=overall_narr["overall"],
        overall_top_issues=overall_rows["overall"],
        policy_narratives=policy_narr,
        policy_issues=policy_rows,
        issue_fix_rows=issue_rows,
        heatmaps=heatmaps,
        issue_threshold=config.issue_threshold,
        ledger_snapshot=dataset.ledger.snapshot(include_wall_time=False),
    )


def filter_issues(report: ComplianceReport, policy_id: str) -> list[IssueFixRow]:
    """Issue/fix rows restricted to one policy; rows with no issues for that
    policy are retained with an empty issue list."""
    if policy_id not in report.policy_ids:
        raise UnknownPolicy(policy_id)
    return [
        IssueFixRow(
            section=row.section,
            original_content=row.original_content,
            issues=[i for i in row.issues if i.policy_id == policy_id],
            fixes=list(row.fixes),
        )
        for row in report.issue_fix_rows
    ]


def report_to_json(report: ComplianceReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


_CELL_GLYPHS = {"skipped": "·", "unscored": "?"}


def report_to_markdown(report: ComplianceReport) -> str:
    """Standalone static export for CLI-only use."""
    out = [f"# Compliance report {report.run_id}", ""]
    out += ["## Overall", "", report.overall_narrative, ""]
    out.append(_priority_markdown(report.overall_top_issues))
    out.append("")
    for pid in report.policy_ids:
        out += [f"## Policy {pid}", "", report.policy_narratives[pid], ""]
        out.append(_priority_markdown(report.policy_issues[pid]))
        out.append("")
        hm = report.heatmaps[pid]
        out.append("| Section | " + " | ".join(hm.cols) + " |")
        out.append("| --- |" + " --- |" * len(hm.cols))
        for name, row in zip(hm.rows, hm.cells):
            glyphs = [
                str(c.score) if c.state == "scored" else _CELL_GLYPHS[c.state] for c in row
            ]
            out.append(f"| {name} | " + " | ".join(glyphs) + " |")
        out.append("")
    out += ["## Sections: issues and fixes", ""]
    for row in report.issue_fix_rows:
        out.append(f"### {row.section.value}")
        out.append("")
        out.append(row.original_content)
        out.append("")
        if row.issues:
            out.append(_issue_markdown(row.issues))
            out.append("")
            for fix in row.fixes:
                out.append(f"- {fix}")
        else:
            out.append("No issues at or above the reporting threshold.")
        out.append("")
    out += ["## Usage", "", _ledger_markdown(report.ledger_snapshot), ""]
    return "\n".join(out)


def _ledger_markdown(snapshot: dict) -> str:
    lines = [
        "| Policy | Phase | In Tokens | Out Tokens | Requests | Cost |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for row in snapshot.get("entries", []):
        lines.append(
            f"| {row['policy_id']} | {row['phase']} | {row['input_tokens']} "
            f"| {row['output_tokens']} | {row['requests']} | {row['cost']} |"
        )
    totals = snapshot.get("totals", {})
    lines.append(
        f"| total |  | {totals.get('input_tokens', 0)} | {totals.get('output_tokens', 0)} "
        f"| {totals.get('requests', 0)} | {totals.get('cost', '0.0000')} |"
    )
    return "\n".join(lines)
