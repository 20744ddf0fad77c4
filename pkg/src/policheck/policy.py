"""Policy normalization: heterogeneous regulations to a common
article/paragraph schema, plus the on-disk policy package.

A package is one directory per policy:

    <dir>/manifest.json     version, source hash, per-file digests
    <dir>/document.json     the normalized document
    <dir>/policy_table.md   rendered markdown table (provider context)
    <dir>/relevancy.json    relevance map (added by the relevancy builder)

Writes are atomic (temp file + rename); loads verify digests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from . import segmentation
from .errors import (
    CorruptPackage,
    EmptyDocument,
    ExtractionFailed,
    MalformedResponse,
    SchemaVersionMismatch,
)
from .gateway import ExpectedFormat, GatewaySession, ProviderRequest
from .prompts import structuring_prompt

if TYPE_CHECKING:
    from .relevancy import RelevancyMap

SCHEMA_VERSION = 1
STRUCTURING_RETRIES = 3


@dataclass(frozen=True)
class PolicyParagraph:
    """Smallest labeled subdivision of an article."""

    label: str
    content: str


@dataclass(frozen=True)
class PolicyArticle:
    """Top-level numbered block of a policy."""

    number: str
    title: str | None
    paragraphs: tuple[PolicyParagraph, ...]


@dataclass(frozen=True)
class PolicyDocument:
    policy_id: str
    full_name: str
    jurisdiction: str
    articles: tuple[PolicyArticle, ...]
    source_hash: str

    def article_numbers(self) -> list[str]:
        return [a.number for a in self.articles]

    def article_index(self) -> dict[str, int]:
        return {a.number: i for i, a in enumerate(self.articles)}

    def article_text(self, number: str) -> str:
        """Concatenated labeled paragraphs of one article."""
        for article in self.articles:
            if article.number == number:
                return "\n".join(f"{p.label} {p.content}" for p in article.paragraphs)
        raise KeyError(number)

    def validate(self) -> None:
        if not self.articles:
            raise EmptyDocument(f"{self.policy_id}: no articles")
        numbers = self.article_numbers()
        if len(numbers) != len(set(numbers)):
            raise CorruptPackage(f"{self.policy_id}: duplicate article numbers")
        for article in self.articles:
            if not article.paragraphs:
                raise CorruptPackage(f"article {article.number}: no paragraphs")
            labels = [p.label for p in article.paragraphs]
            if len(labels) != len(set(labels)):
                raise CorruptPackage(f"article {article.number}: duplicate paragraph labels")
            for para in article.paragraphs:
                if not para.content.strip():
                    raise CorruptPackage(f"article {article.number}: empty paragraph")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "policy_id": self.policy_id,
            "full_name": self.full_name,
            "jurisdiction": self.jurisdiction,
            "source_hash": self.source_hash,
            "articles": [
                {
                    "number": a.number,
                    "title": a.title,
                    "paragraphs": [{"label": p.label, "content": p.content} for p in a.paragraphs],
                }
                for a in self.articles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyDocument":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"document schema {data.get('schema_version')!r}, expected {SCHEMA_VERSION}"
            )
        doc = cls(
            policy_id=data["policy_id"],
            full_name=data["full_name"],
            jurisdiction=data["jurisdiction"],
            source_hash=data["source_hash"],
            articles=tuple(
                PolicyArticle(
                    number=a["number"],
                    title=a.get("title"),
                    paragraphs=tuple(
                        PolicyParagraph(label=p["label"], content=p["content"])
                        for p in a["paragraphs"]
                    ),
                )
                for a in data["articles"]
            ),
        )
        doc.validate()
        return doc


@dataclass
class PolicyPackage:
    """Normalized document bundled with its relevance map."""

    document: PolicyDocument
    relevancy: "RelevancyMap | None" = None
    version: int = 1

    @property
    def policy_id(self) -> str:
        return self.document.policy_id

    def require_relevancy(self) -> "RelevancyMap":
        if self.relevancy is None:
            raise CorruptPackage(f"{self.policy_id}: package has no relevancy map")
        return self.relevancy


def _raw_articles_to_document(
    raw_articles: list[segmentation.RawArticle],
    policy_id: str,
    full_name: str,
    jurisdiction: str,
    source_hash: str,
) -> PolicyDocument:
    doc = PolicyDocument(
        policy_id=policy_id,
        full_name=full_name,
        jurisdiction=jurisdiction,
        source_hash=source_hash,
        articles=tuple(
            PolicyArticle(
                number=a.number,
                title=a.title,
                paragraphs=tuple(
                    PolicyParagraph(label=p.label, content=p.content) for p in a.paragraphs
                ),
            )
            for a in raw_articles
        ),
    )
    doc.validate()
    return doc


def structure_policy(
    raw_html: str,
    policy_id: str,
    full_name: str,
    jurisdiction: str,
    session: GatewaySession | None = None,
) -> PolicyDocument:
    """Normalize raw HTML or plain text into the article/paragraph schema.

    With a session the provider produces the table (retried up to 3 times on
    unparseable output); without one the rule-based segmenter runs directly.
    """
    if not raw_html.strip():
        raise EmptyDocument("source text is empty")
    source_hash = "sha256:" + hashlib.sha256(raw_html.encode()).hexdigest()

    if session is None:
        raw_articles = segmentation.segment_text(raw_html)
        if not raw_articles:
            raise ExtractionFailed(f"{policy_id}: no articles found by fallback parser")
        return _raw_articles_to_document(
            raw_articles, policy_id, full_name, jurisdiction, source_hash
        )

    request = ProviderRequest(
        cached_context="",
        task_prompt=structuring_prompt(segmentation.html_to_text(raw_html)),
        expected_format=ExpectedFormat.POLICY_TABLE,
    )
    last_error: Exception | None = None
    for _ in range(STRUCTURING_RETRIES):
        result = session.complete(request, policy_id, phase="structuring")
        try:
            raw_articles = segmentation.parse_article_rows(result.text)
            if not raw_articles:
                raise MalformedResponse("provider table had no article rows")
            return _raw_articles_to_document(
                raw_articles, policy_id, full_name, jurisdiction, source_hash
            )
        except (MalformedResponse, CorruptPackage, EmptyDocument) as exc:
            last_error = exc
    raise ExtractionFailed(f"{policy_id}: provider output unparseable: {last_error}")


def render_markdown_table(doc: PolicyDocument) -> str:
    """Article | Paragraph | Content table, one row per paragraph, in order.

    The caption line carries id, name, and jurisdiction so distinct
    documents always render distinct tables.
    """
    caption = f"Policy: {doc.policy_id} ({doc.full_name}; {doc.jurisdiction})"
    raw = [
        segmentation.RawArticle(
            number=a.number,
            title=a.title,
            paragraphs=[segmentation.RawParagraph(p.label, p.content) for p in a.paragraphs],
        )
        for a in doc.articles
    ]
    return caption + "\n\n" + segmentation.render_article_rows(raw)


# --- package persistence ---------------------------------------------------


def _dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_package(package: PolicyPackage, out_dir: Path | str) -> Path:
    """Write the package directory atomically; returns the directory path."""
    from .relevancy import relevancy_to_dict

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}

    doc_text = _dumps(package.document.to_dict())
    _atomic_write(out / "document.json", doc_text)
    files["document.json"] = hashlib.sha256(doc_text.encode()).hexdigest()

    table = render_markdown_table(package.document)
    _atomic_write(out / "policy_table.md", table)
    files["policy_table.md"] = hashlib.sha256(table.encode()).hexdigest()

    if package.relevancy is not None:
        rel_text = _dumps(relevancy_to_dict(package.relevancy))
        _atomic_write(out / "relevancy.json", rel_text)
        files["relevancy.json"] = hashlib.sha256(rel_text.encode()).hexdigest()

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "policy_id": package.policy_id,
        "version": package.version,
        "source_hash": package.document.source_hash,
        "files": files,
    }
    _atomic_write(out / "manifest.json", _dumps(manifest))
    return out


def load_package(path: Path | str, require_relevancy: bool = True) -> PolicyPackage:
    """Load and verify a package directory.

    Digest mismatches raise CorruptPackage; a missing or incomplete
    relevancy map raises CorruptPackage unless ``require_relevancy`` is off.
    """
    from .relevancy import relevancy_from_dict, validate_coverage

    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise CorruptPackage(f"{root}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"package schema {manifest.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )

    for name, expected in manifest.get("files", {}).items():
        file_path = root / name
        if not file_path.is_file():
            raise CorruptPackage(f"{root}: manifest lists missing file {name}")
        actual = _file_digest(file_path)
        if actual != expected:
            raise CorruptPackage(f"{root}/{name}: digest mismatch")

    document = PolicyDocument.from_dict(
        json.loads((root / "document.json").read_text(encoding="utf-8"))
    )
    if document.source_hash != manifest["source_hash"]:
        raise CorruptPackage(f"{root}: source hash mismatch between manifest and document")

    relevancy = None
    if "relevancy.json" in manifest.get("files", {}):
        relevancy = relevancy_from_dict(
            json.loads((root / "relevancy.json").read_text(encoding="utf-8"))
        )
        validate_coverage(relevancy, document)
    elif require_relevancy:
        raise CorruptPackage(f"{root}: package has no relevancy map")

    return PolicyPackage(
        document=document, relevancy=relevancy, version=int(manifest["version"])
    )


@dataclass
class IngestResult:
    """What the ingest step produced, for CLI reporting."""

    package_dir: Path
    article_count: int
    paragraph_count: int
    warnings: list[str] = field(default_factory=list)
