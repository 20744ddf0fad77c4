"""Compliance model card: the 23-section description of an AI system.

A card is the system-side input to every comparison. The canonical file
format is one record per section::

    # Model Card: Crop Health Monitor
    card_id: crop-health-monitor

    ## [General Information] System Name
    Crop Health Monitor

    ## [General Information] Versioning Information
    v2.1 ...

Header lines before the first ``##`` record are ``key: value`` metadata
(title comes from the ``# Model Card:`` line). A tabular import path
accepts spreadsheet exports with the exact header ``Category,Section,Content``.
Serialization is deterministic: sections always emit in schema order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass, field
from enum import Enum

NA_MARKER = "N/A"

_SCHEMA = [
    # (category, section, advisory word range (min, max); None = no bound)
    ("General Information", "System Name", (None, 20)),
    ("General Information", "Versioning Information", (40, 60)),
    ("General Information", "Primary Developer/Org", (20, 30)),
    ("General Information", "Contact Information", (10, 20)),
    ("General Information", "System Overview", (40, 60)),
    ("Intended Use", "Primary Intended Uses", (30, 50)),
    ("Intended Use", "Primary Intended Users", (25, 35)),
    ("Intended Use", "Out-of-Scope Use Cases", (30, 50)),
    ("Existing Compliance Information", "Terms and Conditions", (25, 40)),
    ("Existing Compliance Information", "Current legal compliance status", (30, 50)),
    ("System Data Information", "Dataset Description", (40, 60)),
    ("System Data Information", "Collection Method", (30, 45)),
    ("System Data Information", "Bias Mitigation Measures", (30, 45)),
    ("System Data Information", "Usage Constraints", (None, None)),
    ("System Performance and Evaluation", "Summary of Performance", (30, 45)),
    ("System Performance and Evaluation", "Disaggregated Performance", (30, 50)),
    ("System Performance and Evaluation", "Testing Contexts", (30, 50)),
    ("System Performance and Evaluation", "Edge/Adversarial Testing", (30, 45)),
    ("Ethical Considerations", "Potential Risks and Harms", (30, 45)),
    ("Ethical Considerations", "Actions Taken", (30, 50)),
    ("Ethical Considerations", "Misuse Scenarios", (30, 50)),
    ("Maintenance and Monitoring", "Human Oversight", (30, 45)),
    ("Maintenance and Monitoring", "Update Frequency", (25, 40)),
]


class SectionId(Enum):
    """One of the 23 card sections; value is the display name."""

    SYSTEM_NAME = "System Name"
    VERSIONING_INFORMATION = "Versioning Information"
    PRIMARY_DEVELOPER = "Primary Developer/Org"
    CONTACT_INFORMATION = "Contact Information"
    SYSTEM_OVERVIEW = "System Overview"
    PRIMARY_INTENDED_USES = "Primary Intended Uses"
    PRIMARY_INTENDED_USERS = "Primary Intended Users"
    OUT_OF_SCOPE_USE_CASES = "Out-of-Scope Use Cases"
    TERMS_AND_CONDITIONS = "Terms and Conditions"
    LEGAL_COMPLIANCE_STATUS = "Current legal compliance status"
    DATASET_DESCRIPTION = "Dataset Description"
    COLLECTION_METHOD = "Collection Method"
    BIAS_MITIGATION_MEASURES = "Bias Mitigation Measures"
    USAGE_CONSTRAINTS = "Usage Constraints"
    SUMMARY_OF_PERFORMANCE = "Summary of Performance"
    DISAGGREGATED_PERFORMANCE = "Disaggregated Performance"
    TESTING_CONTEXTS = "Testing Contexts"
    EDGE_ADVERSARIAL_TESTING = "Edge/Adversarial Testing"
    POTENTIAL_RISKS_AND_HARMS = "Potential Risks and Harms"
    ACTIONS_TAKEN = "Actions Taken"
    MISUSE_SCENARIOS = "Misuse Scenarios"
    HUMAN_OVERSIGHT = "Human Oversight"
    UPDATE_FREQUENCY = "Update Frequency"

    @property
    def category(self) -> str:
        return _CATEGORY_BY_SECTION[self]

    @property
    def word_range(self) -> tuple[int | None, int | None]:
        return _WORD_RANGE_BY_SECTION[self]


SECTION_ORDER: tuple[SectionId, ...] = tuple(SectionId(name) for _, name, _ in _SCHEMA)
SECTION_INDEX: dict[SectionId, int] = {s: i for i, s in enumerate(SECTION_ORDER)}
CATEGORIES: tuple[str, ...] = tuple(dict.fromkeys(cat for cat, _, _ in _SCHEMA))
_CATEGORY_BY_SECTION: dict[SectionId, str] = {
    SectionId(name): cat for cat, name, _ in _SCHEMA
}
_WORD_RANGE_BY_SECTION: dict[SectionId, tuple[int | None, int | None]] = {
    SectionId(name): rng for _, name, rng in _SCHEMA
}
_SECTION_BY_NAME: dict[str, SectionId] = {s.value: s for s in SectionId}

assert len(SECTION_ORDER) == 23
assert len(CATEGORIES) == 7


@dataclass(frozen=True)
class ModelCard:
    """Validated card: all 23 sections present, content text or ``N/A``."""

    card_id: str
    title: str
    sections: dict[SectionId, str]
    created_at: str | None = None

    def section_content(self, section: SectionId) -> str:
        """Exact stored text for a section; ``N/A`` passes through unmodified."""
        return self.sections[section]

    def digest(self) -> str:
        """Content digest over title and section texts (order-independent input)."""
        h = hashlib.sha256()
        h.update(self.title.encode())
        for section in SECTION_ORDER:
            h.update(b"\x1f")
            h.update(section.value.encode())
            h.update(b"\x1e")
            h.update(self.sections[section].encode())
        return h.hexdigest()

    def to_text(self) -> str:
        """Deterministic canonical serialization (schema section order)."""
        out = [f"# Model Card: {self.title}", f"card_id: {self.card_id}"]
        if self.created_at:
            out.append(f"created_at: {self.created_at}")
        for section in SECTION_ORDER:
            out.append("")
            out.append(f"## [{section.category}] {section.value}")
            out.append(self.sections[section])
        return "\n".join(out) + "\n"


@dataclass
class ValidationReport:
    """Everything wrong (or advisory) about a non-valid card input."""

    missing: list[str] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)
    empty: list[str] = field(default_factory=list)
    malformed: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.unknown or self.empty or self.malformed)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "missing": self.missing,
            "unknown": self.unknown,
            "empty": self.empty,
            "malformed": self.malformed,
            "warnings": self.warnings,
        }


_RECORD_RE = re.compile(r"^##\s*\[(?P<category>[^\]]+)\]\s*(?P<section>.+?)\s*$")
_TITLE_RE = re.compile(r"^#\s*Model Card:\s*(?P<title>.*)$")
_META_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*:\s*(?P<value>.*)$")

_WS_RE = re.compile(r"[ \t]+")


def _normalize_content(text: str) -> str:
    """Collapse runs of spaces/tabs and trim blank edges; keep inner newlines."""
    lines = [_WS_RE.sub(" ", ln).strip() for ln in text.splitlines()]
    while lines and not lines[0]:
        lines.pop(0)
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


def _word_count_warnings(found: dict[SectionId, str]) -> list[str]:
    warnings = []
    for section, content in found.items():
        if content == NA_MARKER:
            continue
        lo, hi = section.word_range
        n = len(content.split())
        if lo is not None and n < lo:
            warnings.append(f"{section.value}: {n} words, guidance suggests at least {lo}")
        elif hi is not None and n > hi:
            warnings.append(f"{section.value}: {n} words, guidance suggests at most {hi}")
    return warnings


def _assemble(
    title: str,
    meta: dict[str, str],
    rows: list[tuple[str, str, str]],
    report: ValidationReport,
) -> ModelCard | ValidationReport:
    """Shared validation tail for both input formats."""
    found: dict[SectionId, str] = {}
    for category, name, content in rows:
        section = _SECTION_BY_NAME.get(name)
        if section is None:
            report.unknown.append(name)
            continue
        if category != section.category:
            report.malformed.append(
                f"{name}: listed under {category!r}, belongs to {section.category!r}"
            )
            continue
        if section in found:
            report.malformed.append(f"{name}: duplicate record")
            continue
        content = _normalize_content(content)
        if not content:
            report.empty.append(name)
            continue
        found[section] = content

    for section in SECTION_ORDER:
        if section not in found and section.value not in report.empty:
            report.missing.append(section.value)

    report.warnings.extend(_word_count_warnings(found))
    if not report.ok:
        return report

    card_id = meta.get("card_id") or ""
    card = ModelCard(
        card_id=card_id,
        title=title,
        sections=found,
        created_at=meta.get("created_at"),
    )
    if not card_id:
        card = ModelCard(
            card_id="card-" + card.digest()[:12],
            title=title,
            sections=found,
            created_at=meta.get("created_at"),
        )
    return card


def validate_model_card(raw: str) -> ValidationReport:
    """Validation report for canonical card text, advisory warnings included.

    Unlike :func:`parse_model_card` this always returns the report, so
    word-count warnings are visible even when the card is valid.
    """
    result = parse_model_card(raw)
    if isinstance(result, ValidationReport):
        return result
    report = ValidationReport()
    report.warnings.extend(_word_count_warnings(result.sections))
    return report


def parse_model_card(raw: str) -> ModelCard | ValidationReport:
    """Parse canonical card text; total: never raises on bad input.

    Returns a :class:`ModelCard` when the document is valid, otherwise a
    :class:`ValidationReport` listing every problem found.
    """
    report = ValidationReport()
    title = ""
    meta: dict[str, str] = {}
    rows: list[tuple[str, str, str]] = []
    current: tuple[str, str] | None = None
    buffer: list[str] = []
    in_header = True

    def flush() -> None:
        if current is not None:
            rows.append((current[0], current[1], "\n".join(buffer)))

    for lineno, line in enumerate(raw.splitlines(), start=1):
        record = _RECORD_RE.match(line)
        if record:
            flush()
            current = (record.group("category").strip(), record.group("section").strip())
            buffer = []
            in_header = False
            continue
        if in_header:
            if not line.strip():
                continue
            title_match = _TITLE_RE.match(line)
            if title_match:
                title = title_match.group("title").strip()
                continue
            meta_match = _META_RE.match(line)
            if meta_match:
                meta[meta_match.group("key")] = meta_match.group("value").strip()
                continue
            report.malformed.append(f"line {lineno}: unexpected text before first section")
            continue
        buffer.append(line)
    flush()

    if current is None and not report.malformed:
        report.malformed.append("no section records found")
    return _assemble(title, meta, rows, report)


CSV_HEADER = ("Category", "Section", "Content")


def parse_model_card_csv(
    raw: str, *, title: str = "", card_id: str = ""
) -> ModelCard | ValidationReport:
    """Parse a spreadsheet export with header ``Category,Section,Content``."""
    report = ValidationReport()
    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        report.malformed.append("empty file")
        return report
    if tuple(h.strip() for h in header) != CSV_HEADER:
        report.malformed.append(
            f"header must be exactly {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )
        return report
    rows: list[tuple[str, str, str]] = []
    for i, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            report.malformed.append(f"row {i}: expected 3 columns, got {len(row)}")
            continue
        rows.append((row[0].strip(), row[1].strip(), row[2]))
    meta = {"card_id": card_id} if card_id else {}
    return _assemble(title, meta, rows, report)


def load_model_card(path) -> ModelCard | ValidationReport:
    """Load from a file path; dispatches on extension (.csv vs canonical)."""
    from pathlib import Path

    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".csv":
        return parse_model_card_csv(text, title=p.stem)
    return parse_model_card(text)
