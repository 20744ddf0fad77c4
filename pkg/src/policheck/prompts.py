"""Prompt construction for every provider task.

Prompt wording is a versioned artifact: PROMPT_VERSION is stamped into run
manifests, and any change here must bump it (run outputs are not comparable
across prompt versions). The block markers double as the grammar the
deterministic mock provider parses, so they must stay in sync with
:mod:`policheck.gateway`.
"""

from __future__ import annotations

import re

PROMPT_VERSION = "1"

SECTION_MARK = "=== SECTION {name} ==="
ARTICLE_MARK = "=== ARTICLE {number} ==="
SOURCE_MARK = "=== SOURCE ==="
TABLE_MARK = "=== RESULTS TABLE ==="

_SECTION_RE = re.compile(r"^=== SECTION (?P<name>.+?) ===$", re.MULTILINE)
_ARTICLE_RE = re.compile(r"^=== ARTICLE (?P<number>.+?) ===$", re.MULTILINE)

VIOLATION_RUBRIC = (
    "Score each pairing 0-5: 0 no violation, 1 minor ambiguity, 2 ambiguous, "
    "3 possible risk, 4 probable violation, 5 clear violation. "
    "Reply with a two-column table | article | {\"score\": int, \"description\": text-or-null} |; "
    "description is required for any score above 0."
)

RELEVANCE_RUBRIC = (
    "Score each pairing 0-5 for how much the documentation section contributes "
    "to assessing compliance with the article: 0 not needed, 1 marginal, 2 some, "
    "3 moderate, 4 high, 5 essential. "
    "Reply with a two-column table | section | {\"score\": int, \"description\": null} |."
)


def violation_prompt(section_name: str, section_content: str, articles: list[tuple[str, str]]) -> str:
    """One scoring request: a single card section against a batch of articles."""
    parts = [VIOLATION_RUBRIC, "", SECTION_MARK.format(name=section_name), section_content]
    for number, text in articles:
        parts.append("")
        parts.append(ARTICLE_MARK.format(number=number))
        parts.append(text)
    return "\n".join(parts)


def relevance_prompt(article_number: str, article_text: str, sections: list[tuple[str, str]]) -> str:
    """One relevance request: every card section against a single article."""
    parts = [RELEVANCE_RUBRIC, "", ARTICLE_MARK.format(number=article_number), article_text]
    for name, content in sections:
        parts.append("")
        parts.append(SECTION_MARK.format(name=name))
        parts.append(content)
    return "\n".join(parts)


def grouping_prompt(articles: list[tuple[str, str]]) -> str:
    """Ask for clusters of thematically related articles (JSON list of lists)."""
    parts = [
        "Group the following articles into clusters of related regulatory themes. "
        "Keep document order inside each cluster and use every article exactly once. "
        "Reply with a JSON list of lists of article numbers.",
    ]
    for number, text in articles:
        parts.append("")
        parts.append(ARTICLE_MARK.format(number=number))
        parts.append(text)
    return "\n".join(parts)


def structuring_prompt(raw_text: str) -> str:
    """Ask for the Article | Paragraph | Content normalization of raw policy text."""
    return (
        "Normalize the policy text below into a markdown table with columns "
        "Article | Paragraph | Content, one row per labeled paragraph, keeping "
        "all normative text and the source numbering.\n\n"
        f"{SOURCE_MARK}\n{raw_text}"
    )


def summary_prompt(scope: str, issue_table: str) -> str:
    """Ask for a short narrative over a locally computed issue table."""
    return (
        f"Write a short compliance summary for {scope}. Base it strictly on the "
        f"table below; do not invent figures.\n\n{TABLE_MARK}\n{issue_table}"
    )


def fixes_prompt(section_name: str, section_content: str, issue_table: str) -> str:
    """Ask for concrete remediation suggestions for one card section."""
    return (
        f"Suggest concrete documentation fixes for the card section "
        f"{SECTION_MARK.format(name=section_name)}\n{section_content}\n\n"
        f"Detected issues:\n{TABLE_MARK}\n{issue_table}\n"
        "Reply with one suggestion per line, each starting with '- '."
    )


# --- parsing helpers used by the mock provider ---------------------------


def split_marked_blocks(prompt: str) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """Return ([(section name, body)], [(article number, body)]) in prompt order."""
    marks: list[tuple[int, int, str, str]] = []
    for m in _SECTION_RE.finditer(prompt):
        marks.append((m.start(), m.end(), "section", m.group("name")))
    for m in _ARTICLE_RE.finditer(prompt):
        marks.append((m.start(), m.end(), "article", m.group("number")))
    marks.sort()
    sections: list[tuple[str, str]] = []
    articles: list[tuple[str, str]] = []
    for i, (_, end, kind, key) in enumerate(marks):
        body_end = marks[i + 1][0] if i + 1 < len(marks) else len(prompt)
        body = prompt[end:body_end].strip()
        (sections if kind == "section" else articles).append((key, body))
    return sections, articles


def extract_source(prompt: str) -> str:
    """Body after the source marker in a structuring prompt."""
    _, _, tail = prompt.partition(SOURCE_MARK)
    return tail.strip()


def extract_table(prompt: str) -> str:
    """Body after the results-table marker in a summary/fixes prompt."""
    _, _, tail = prompt.partition(TABLE_MARK)
    return tail.strip()
