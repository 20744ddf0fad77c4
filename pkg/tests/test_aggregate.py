from __future__ import annotations

import json

import pytest

from policheck.aggregate import (
    NARRATIVE_PLACEHOLDER,
    NO_PAIRS_NARRATIVE,
    build_heatmap,
    build_issue_fix_rows,
    build_report,
    filter_issues,
    priority_table,
    report_to_json,
    report_to_markdown,
    summarize,
)
from policheck.engine import (
    ComparisonPair,
    EngineConfig,
    EvaluationRecord,
    ResultDataset,
    evaluate_run,
)
from policheck.errors import ProviderError, UnknownPolicy
from policheck.gateway import GatewaySession, MockProvider, UsageLedger
from policheck.model_card import SECTION_ORDER, SectionId

from test_engine import doc_with


def record(policy_id, article, section, score, run="r1"):
    return EvaluationRecord(
        pair=ComparisonPair(section=section, policy_id=policy_id, article=article),
        violation_score=score,
        description=None if score == 0 else f"finding for {article}",
        run_id=run,
        batch_id="b0",
    )


def synthetic_dataset(doc, score_fn, skipped_pairs=()):
    records = []
    skipped = []
    for article in doc.article_numbers():
        for section in SECTION_ORDER:
            if (section, article) in skipped_pairs:
                skipped.append(
                    ComparisonPair(section=section, policy_id=doc.policy_id, article=article)
                )
            else:
                records.append(record(doc.policy_id, article, section, score_fn(section, article)))
    return ResultDataset(
        run_id="r1", records=records, skipped=skipped,
        ledger=UsageLedger(), policy_ids=(doc.policy_id,),
    )


def test_heatmap_dimensions_and_bijection(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    doc = fixture_packages[1].document  # ATC, 9 articles
    heatmap = build_heatmap(dataset, doc)
    assert len(heatmap.rows) == 23
    assert heatmap.cols == doc.article_numbers()
    assert all(len(row) == len(heatmap.cols) for row in heatmap.cells)

    # cell states reconstruct the dataset restriction to this policy
    for record_ in dataset.records_for(doc.policy_id):
        r = heatmap.rows.index(record_.pair.section.value)
        c = heatmap.cols.index(record_.pair.article)
        cell = heatmap.cells[r][c]
        if record_.violation_score is None:
            assert cell.state == "unscored"
        else:
            assert cell.state == "scored"
            assert cell.score == record_.violation_score
            assert cell.rationale == record_.description
    for pair in dataset.skipped_for(doc.policy_id):
        r = heatmap.rows.index(pair.section.value)
        c = heatmap.cols.index(pair.article)
        assert heatmap.cells[r][c].state == "skipped"


def test_skipped_cell_is_distinct_from_score_zero():
    doc = doc_with(3)
    target = (SectionId.CONTACT_INFORMATION, "2")
    dataset = synthetic_dataset(doc, lambda s, a: 0, skipped_pairs={target})
    heatmap = build_heatmap(dataset, doc)
    r = heatmap.rows.index(target[0].value)
    c = heatmap.cols.index("2")
    assert heatmap.cells[r][c].state == "skipped"
    assert heatmap.cells[r][c].score is None
    flat = [cell.state for row in heatmap.cells for cell in row]
    assert flat.count("skipped") == 1


def test_all_zero_dataset_renders_all_zero_cells():
    doc = doc_with(4)
    dataset = synthetic_dataset(doc, lambda s, a: 0)
    heatmap = build_heatmap(dataset, doc)
    assert all(cell.score == 0 for row in heatmap.cells for cell in row)


def test_incomplete_dataset_is_rejected():
    doc = doc_with(2)
    dataset = synthetic_dataset(doc, lambda s, a: 0)
    dataset.records.pop()
    with pytest.raises(ValueError):
        build_heatmap(dataset, doc)


def test_priority_table_puts_severe_articles_first():
    doc = doc_with(12, policy_id="EUF")
    scores = {"6": 5, "7": 5, "8": 4, "9": 4}

    def score_fn(section, article):
        return scores.get(article, 1)

    dataset = synthetic_dataset(doc, score_fn)
    rows = priority_table(dataset.records, 2, {"EUF": doc.article_index()})
    assert [r.article for r in rows[:4]] == ["6", "7", "8", "9"]
    assert [r.max_score for r in rows[:4]] == [5, 5, 4, 4]
    # equal score and count: document order breaks the tie
    assert rows[0].pair_count == rows[1].pair_count == 23


def test_priority_ties_break_by_count_then_article_order():
    doc = doc_with(6)
    records = [
        record("SYN", "3", SectionId.SYSTEM_NAME, 4),
        record("SYN", "5", SectionId.SYSTEM_NAME, 4),
        record("SYN", "5", SectionId.CONTACT_INFORMATION, 4),
        record("SYN", "1", SectionId.SYSTEM_NAME, 2),
    ]
    rows = priority_table(records, 2, {"SYN": doc.article_index()})
    assert [(r.article, r.max_score, r.pair_count) for r in rows] == [
        ("5", 4, 2),
        ("3", 4, 1),
        ("1", 2, 1),
    ]


def test_summarize_all_zero_scores(crop_card):
    doc = doc_with(3)
    dataset = synthetic_dataset(doc, lambda s, a: 0)
    session = GatewaySession(MockProvider())
    narratives, tables = summarize(dataset, session, "overall", {"SYN": doc})
    assert tables["overall"] == []
    assert "No violations detected" in narratives["overall"]


def test_summarize_empty_dataset_has_fixed_text():
    dataset = ResultDataset(
        run_id="r", records=[], skipped=[], ledger=UsageLedger(), policy_ids=()
    )
    narratives, tables = summarize(dataset, GatewaySession(MockProvider()), "overall", {})
    assert narratives["overall"] == NO_PAIRS_NARRATIVE
    assert tables["overall"] == []


class BrokenSummaries:
    def __init__(self):
        self.inner = MockProvider()

    def complete(self, request):
        from policheck.gateway import ExpectedFormat

        if request.expected_format is ExpectedFormat.SUMMARY_TEXT:
            raise ProviderError("no narratives today")
        return self.inner.complete(request)


def test_provider_failure_ships_placeholder_narrative(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    documents = {p.policy_id: p.document for p in fixture_packages}
    report = build_report(crop_card, documents, dataset, BrokenSummaries())
    assert report.overall_narrative == NARRATIVE_PLACEHOLDER
    assert all(n == NARRATIVE_PLACEHOLDER for n in report.policy_narratives.values())
    assert report.overall_top_issues  # tables still computed locally


def test_issue_rows_cover_all_sections_in_order(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    session = GatewaySession(MockProvider())
    rows = build_issue_fix_rows(dataset, crop_card, session)
    assert [row.section for row in rows] == list(SECTION_ORDER)
    assert all(row.original_content == crop_card.sections[row.section] for row in rows)
    for row in rows:
        for issue in row.issues:
            assert issue.score >= 2
        if row.issues:
            assert row.fixes


def test_traceability_every_issue_maps_to_one_record(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    documents = {p.policy_id: p.document for p in fixture_packages}
    report = build_report(crop_card, documents, dataset, MockProvider())
    by_id = {r.record_id: r for r in dataset.records}
    for row in report.issue_fix_rows:
        for issue in row.issues:
            source = by_id[issue.record_id]
            assert source.violation_score == issue.score
            assert source.description == issue.rationale
    for prio in report.overall_top_issues:
        for record_id in prio.record_ids:
            assert record_id in by_id


def test_filter_issues_restricts_to_one_policy(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    documents = {p.policy_id: p.document for p in fixture_packages}
    report = build_report(crop_card, documents, dataset, MockProvider())

    adaa_rows = filter_issues(report, "ADAA")
    assert len(adaa_rows) == 23  # zero-issue rows retained
    for row in adaa_rows:
        assert all(issue.policy_id == "ADAA" for issue in row.issues)
        assert row.original_content

    with pytest.raises(UnknownPolicy):
        filter_issues(report, "NOPE")


def test_filter_issues_zero_issue_policy_keeps_rows(crop_card):
    doc = doc_with(3, policy_id="CLEAN")
    dataset = synthetic_dataset(doc, lambda s, a: 0)
    report = build_report(crop_card, {"CLEAN": doc}, dataset, MockProvider())
    rows = filter_issues(report, "CLEAN")
    assert len(rows) == 23
    assert all(not row.issues for row in rows)
    assert all(row.original_content for row in rows)


def test_report_bytes_are_deterministic(crop_card, fixture_packages):
    documents = {p.policy_id: p.document for p in fixture_packages}
    r1 = build_report(
        crop_card, documents, evaluate_run(crop_card, fixture_packages, MockProvider()),
        MockProvider(),
    )
    r2 = build_report(
        crop_card, documents, evaluate_run(crop_card, fixture_packages, MockProvider()),
        MockProvider(),
    )
    assert report_to_json(r1) == report_to_json(r2)
    assert report_to_markdown(r1) == report_to_markdown(r2)


def test_markdown_export_contains_every_layer(crop_card, fixture_packages):
    dataset = evaluate_run(crop_card, fixture_packages, MockProvider())
    documents = {p.policy_id: p.document for p in fixture_packages}
    report = build_report(crop_card, documents, dataset, MockProvider())
    text = report_to_markdown(report)
    assert "## Overall" in text
    assert "## Policy ADAA" in text and "## Policy ATC" in text
    assert "## Sections: issues and fixes" in text
    assert "## Usage" in text
    assert "| Policy | Phase | In Tokens | Out Tokens | Requests | Cost |" in text
    data = json.loads(report_to_json(report))
    assert set(data["heatmaps"]) == {"ADAA", "ATC"}
    assert data["issue_threshold"] == EngineConfig().issue_threshold
