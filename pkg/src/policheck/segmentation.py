"""Rule-based segmentation of raw policy text into articles and paragraphs.

Heuristics only: numbered headings start articles, labels like ``(1)`` or
``(a)`` start paragraphs. This is the offline fallback for policy
structuring and also what the deterministic mock provider runs internally,
so both ingestion routes agree on fixtures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

# "Article 3 — Title", "Section 12: Title", "§1798.100. Title", "Art. 6 Title"
_HEADING_RE = re.compile(
    r"^(?:Article|Art\.?|Section|Sec\.?|§)\s*(?P<number>\d[\w.\-]*?)"
    r"[.:]?\s*(?:[—–:-]\s*)?(?P<title>.*)$",
    re.IGNORECASE,
)
# bare numbered heading: "3. Scope" (short line, no trailing period prose)
_BARE_HEADING_RE = re.compile(r"^(?P<number>\d{1,4})\.\s+(?P<title>[^.]{1,70})$")
_PARA_LABEL_RE = re.compile(r"^\((?P<label>\d{1,3}|[a-z]{1,3})\)\s*(?P<rest>.*)$")
_SKIP_HEADING_RE = re.compile(r"^(?:Annex|Recital|Preamble|Schedule)\b", re.IGNORECASE)


@dataclass
class RawParagraph:
    label: str
    content: str


@dataclass
class RawArticle:
    number: str
    title: str | None
    paragraphs: list[RawParagraph] = field(default_factory=list)


class _TextExtractor(HTMLParser):
    """Collapse HTML to plain text; block-level tags become line breaks."""

    _BLOCK_TAGS = {"p", "div", "li", "br", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "section", "article"}
    _IGNORE = {"script", "style"}

    def __init__(self) -> None:
        super().__init__()
        self.parts: list[str] = []
        self._suppress = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._IGNORE:
            self._suppress += 1
        elif tag in self._BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in self._IGNORE and self._suppress:
            self._suppress -= 1
        elif tag in self._BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if not self._suppress:
            self.parts.append(data)

    def text(self) -> str:
        return "".join(self.parts)


def html_to_text(raw: str) -> str:
    """Strip markup when the input looks like HTML; pass plain text through."""
    if "<" not in raw or ">" not in raw:
        return raw
    extractor = _TextExtractor()
    extractor.feed(raw)
    return extractor.text()


def _flush_paragraph(article: RawArticle, label: str | None, lines: list[str]) -> None:
    content = " ".join(" ".join(lines).split())
    if not content:
        return
    if label is None:
        label = f"({len(article.paragraphs) + 1})"
    article.paragraphs.append(RawParagraph(label=label, content=content))


def segment_text(raw: str) -> list[RawArticle]:
    """Split plain policy text into articles with labeled paragraphs.

    Sources without any recognizable heading become a single article "1";
    an unlabeled body becomes one paragraph labeled "(1)". Annex/recital
    blocks are dropped: only numbered articles are kept.
    """
    text = html_to_text(raw)
    articles: list[RawArticle] = []
    current: RawArticle | None = None
    label: str | None = None
    lines: list[str] = []
    skipping = False
    implicit_first = False

    def close_paragraph() -> None:
        nonlocal label, lines
        if current is not None:
            _flush_paragraph(current, label, lines)
        label = None
        lines = []

    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if _SKIP_HEADING_RE.match(stripped):
            close_paragraph()
            skipping = True
            continue
        heading = _HEADING_RE.match(stripped) or _BARE_HEADING_RE.match(stripped)
        if heading:
            close_paragraph()
            skipping = False
            current = RawArticle(
                number=heading.group("number"),
                title=heading.group("title").strip() or None,
            )
            articles.append(current)
            continue
        if skipping:
            continue
        if current is None:
            current = RawArticle(number="1", title=None)
            articles.append(current)
            implicit_first = True
        para = _PARA_LABEL_RE.match(stripped)
        if para:
            close_paragraph()
            label = f"({para.group('label')})"
            lines = [para.group("rest")] if para.group("rest") else []
        else:
            lines.append(stripped)
    close_paragraph()
    if implicit_first and len(articles) > 1:
        # everything before the first real heading was preamble/title text
        articles = articles[1:]
    return [a for a in articles if a.paragraphs]


def render_article_rows(articles: list[RawArticle]) -> str:
    """Emit the Article | Paragraph | Content table used as the common schema.

    Article titles ride along as ``number (title)`` in the first column so
    the table round-trips without a fourth column.
    """
    out = ["| Article | Paragraph | Content |", "| --- | --- | --- |"]
    for article in articles:
        cell = article.number if not article.title else f"{article.number} ({article.title})"
        for para in article.paragraphs:
            content = para.content.replace("|", "\\|")
            out.append(f"| {cell} | {para.label} | {content} |")
    return "\n".join(out) + "\n"


_ARTICLE_CELL_RE = re.compile(r"^(?P<number>\S+?)(?:\s+\((?P<title>.+)\))?$")


def parse_article_rows(table: str) -> list[RawArticle]:
    """Inverse of :func:`render_article_rows`; tolerant of surrounding prose."""
    articles: list[RawArticle] = []
    index: dict[str, RawArticle] = {}
    for line in table.splitlines():
        line = line.strip()
        if not line.startswith("|"):
            continue
        cells = [c.strip() for c in _split_row(line)]
        if len(cells) != 3:
            continue
        article_cell, label, content = cells
        if article_cell.lower() == "article" or set(article_cell) <= {"-", ":", " "}:
            continue
        if not content:
            continue
        cell_match = _ARTICLE_CELL_RE.match(article_cell)
        if not cell_match:
            continue
        number = cell_match.group("number")
        article = index.get(number)
        if article is None:
            article = RawArticle(number=number, title=cell_match.group("title"))
            index[number] = article
            articles.append(article)
        article.paragraphs.append(
            RawParagraph(label=label or f"({len(article.paragraphs) + 1})", content=content)
        )
    return articles


def _split_row(line: str) -> list[str]:
    """Split a markdown table row honoring backslash-escaped pipes."""
    cells: list[str] = []
    buf: list[str] = []
    escaped = False
    for ch in line.strip().strip("|"):
        if escaped:
            buf.append(ch)
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == "|":
            cells.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    cells.append("".join(buf))
    return cells
