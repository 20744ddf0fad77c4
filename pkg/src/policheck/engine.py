"""Pairwise compliance evaluation: cluster articles, batch kept pairs,
score violations through the provider, and assemble a deterministic
result dataset.

Policies evaluate concurrently; batches within a policy evaluate
concurrently under a bound. Whatever order completions arrive in, the
dataset is assembled by one deterministic merge, so equal inputs always
produce byte-identical output files.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import MalformedResponse, ProviderError
from .gateway import (
    ContextCache,
    ExpectedFormat,
    GatewaySession,
    LlmProvider,
    ProviderRequest,
    UsageLedger,
    parse_score_table,
)
from .model_card import SECTION_INDEX, SECTION_ORDER, ModelCard, SectionId
from .policy import PolicyDocument, PolicyPackage, render_markdown_table
from .prompts import PROMPT_VERSION, grouping_prompt, violation_prompt
from .relevancy import kept_pairs, skipped_pairs, validate_coverage

RUN_SCHEMA = f"1+prompt{PROMPT_VERSION}"


@dataclass(frozen=True)
class EngineConfig:
    max_batch: int = 15          # hard cap on comparison pairs per request
    target_batch: int = 12       # preferred request size
    batch_parallelism: int = 4
    policy_parallelism: int | None = None  # None = one worker per policy
    retries: int = 3
    issue_threshold: int = 2
    provider_clustering: bool = True

    def digest_parts(self) -> str:
        return json.dumps(
            [self.max_batch, self.target_batch, self.retries, self.provider_clustering]
        )


@dataclass(frozen=True)
class ComparisonPair:
    section: SectionId
    policy_id: str
    article: str

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "article": self.article,
            "section": self.section.value,
        }


@dataclass(frozen=True)
class Batch:
    policy_id: str
    section: SectionId
    articles: tuple[str, ...]
    cluster_label: str
    batch_id: str

    def __post_init__(self) -> None:
        if not self.articles:
            raise ValueError("batch must carry at least one article")


@dataclass(frozen=True)
class EvaluationRecord:
    pair: ComparisonPair
    violation_score: int | None  # None = unscored after retries, never coerced to 0
    description: str | None
    run_id: str
    batch_id: str

    def __post_init__(self) -> None:
        if self.violation_score is not None:
            if not 0 <= self.violation_score <= 5:
                raise ValueError(f"violation score out of range: {self.violation_score}")
            if self.violation_score > 0 and not self.description:
                raise ValueError("scores above 0 require a rationale")

    @property
    def record_id(self) -> str:
        return f"{self.pair.policy_id}:{self.pair.article}:{self.pair.section.value}"

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "policy_id": self.pair.policy_id,
            "article": self.pair.article,
            "section": self.pair.section.value,
            "score": self.violation_score,
            "description": self.description,
            "batch_id": self.batch_id,
        }


@dataclass
class ResultDataset:
    run_id: str
    records: list[EvaluationRecord]
    skipped: list[ComparisonPair]
    ledger: UsageLedger
    policy_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        """Deterministic serialization: no wall-clock values in here."""
        return {
            "run_schema": RUN_SCHEMA,
            "run_id": self.run_id,
            "policy_ids": list(self.policy_ids),
            "records": [r.to_dict() for r in self.records],
            "skipped": [p.to_dict() for p in self.skipped],
        }

    def records_for(self, policy_id: str) -> list[EvaluationRecord]:
        return [r for r in self.records if r.pair.policy_id == policy_id]

    def skipped_for(self, policy_id: str) -> list[ComparisonPair]:
        return [p for p in self.skipped if p.policy_id == policy_id]


def fallback_clusters(article_numbers: list[str], max_batch: int) -> list[list[str]]:
    """Document-order chunks of at most max_batch articles."""
    return [
        list(article_numbers[i : i + max_batch])
        for i in range(0, len(article_numbers), max_batch)
    ]


def cluster_articles(
    document: PolicyDocument,
    session: GatewaySession | None,
    config: EngineConfig = EngineConfig(),
) -> list[list[str]]:
    """Group related articles for batching; clusters partition the article list.

    The provider proposes the grouping; anything that is not an exact
    partition falls back to document-order chunks, as does any provider
    failure. Within a cluster, document order is restored.
    """
    numbers = document.article_numbers()
    if session is None or not config.provider_clustering:
        return fallback_clusters(numbers, config.max_batch)

    request = ProviderRequest(
        cached_context="",
        task_prompt=grouping_prompt(
            [(a.number, document.article_text(a.number)) for a in document.articles]
        ),
        expected_format=ExpectedFormat.GROUPING,
    )
    try:
        result = session.complete(request, document.policy_id, phase="evaluate")
        proposed = json.loads(result.text)
        clusters = [[str(n) for n in group] for group in proposed]
    except (ProviderError, json.JSONDecodeError, TypeError):
        return fallback_clusters(numbers, config.max_batch)

    flat = [n for group in clusters for n in group]
    if sorted(flat) != sorted(numbers):
        return fallback_clusters(numbers, config.max_batch)

    index = document.article_index()
    ordered = [sorted(group, key=index.__getitem__) for group in clusters if group]
    split: list[list[str]] = []
    for group in ordered:
        for i in range(0, len(group), config.max_batch):
            split.append(group[i : i + config.max_batch])
    return split


def plan_batches(
    kept: list[tuple[SectionId, str]],
    clusters: list[list[str]],
    policy_id: str,
    config: EngineConfig = EngineConfig(),
) -> list[Batch]:
    """Assign every kept pair to exactly one single-section batch.

    Whole clusters pack greedily up to target_batch; clusters larger than
    max_batch split into consecutive max_batch-sized runs first. Batches
    never mix sections.
    """
    kept_by_section: dict[SectionId, set[str]] = {}
    for section, article in kept:
        kept_by_section.setdefault(section, set()).add(article)

    batches: list[Batch] = []
    for section in SECTION_ORDER:
        articles_kept = kept_by_section.get(section)
        if not articles_kept:
            continue
        chunks: list[tuple[str, list[str]]] = []
        for ci, cluster in enumerate(clusters):
            in_cluster = [a for a in cluster if a in articles_kept]
            if not in_cluster:
                continue
            for i in range(0, len(in_cluster), config.max_batch):
                chunks.append((f"c{ci}", in_cluster[i : i + config.max_batch]))

        current: list[str] = []
        labels: list[str] = []
        seq = 0

        def flush() -> None:
            nonlocal current, labels, seq
            if current:
                batches.append(
                    Batch(
                        policy_id=policy_id,
                        section=section,
                        articles=tuple(current),
                        cluster_label="+".join(dict.fromkeys(labels)),
                        batch_id=f"{policy_id}:s{SECTION_INDEX[section]:02d}:b{seq}",
                    )
                )
                seq += 1
            current, labels = [], []

        for label, chunk in chunks:
            if current and len(current) + len(chunk) > config.target_batch:
                flush()
            current.extend(chunk)
            labels.append(label)
        flush()
    return batches


def compute_run_id(
    card: ModelCard,
    packages: list[PolicyPackage],
    provider_kind: str,
    config: EngineConfig,
) -> str:
    """Content-derived run id so identical inputs reproduce identical outputs."""
    h = hashlib.sha256()
    h.update(card.digest().encode())
    for package in sorted(packages, key=lambda p: p.policy_id):
        h.update(package.policy_id.encode())
        h.update(str(package.version).encode())
        h.update(package.document.source_hash.encode())
        rmap = package.relevancy
        if rmap is not None:
            for cell in rmap.iter_cells():
                h.update(
                    f"{cell.section.value}|{cell.article}|{cell.scores}|{cell.unscored}".encode()
                )
    h.update(provider_kind.encode())
    h.update(RUN_SCHEMA.encode())
    h.update(config.digest_parts().encode())
    return "run-" + h.hexdigest()[:16]


def _execute_batch(
    batch: Batch,
    card: ModelCard,
    document: PolicyDocument,
    context: str,
    session: GatewaySession,
    run_id: str,
    config: EngineConfig,
) -> list[EvaluationRecord]:
    """Score one batch; on persistent parse failure, mark its pairs unscored."""
    section_content = card.sections[batch.section]
    article_pairs = [(n, document.article_text(n)) for n in batch.articles]
    request = ProviderRequest(
        cached_context=context,
        task_prompt=violation_prompt(batch.section.value, section_content, article_pairs),
        expected_format=ExpectedFormat.SCORE_TABLE,
    )

    scored: dict[str, tuple[int, str | None]] | None = None
    for _ in range(config.retries):
        try:
            result = session.complete(request, batch.policy_id, phase="evaluate")
            rows = parse_score_table(result.text)
            by_article = {row.article: (row.score, row.description) for row in rows}
            missing = [n for n in batch.articles if n not in by_article]
            if missing:
                raise MalformedResponse(f"missing rows for articles {missing}")
            scored = by_article
            break
        except (MalformedResponse, ProviderError):
            continue

    records = []
    for number in batch.articles:
        pair = ComparisonPair(section=batch.section, policy_id=batch.policy_id, article=number)
        if scored is None:
            records.append(
                EvaluationRecord(
                    pair=pair, violation_score=None, description=None,
                    run_id=run_id, batch_id=batch.batch_id,
                )
            )
        else:
            score, description = scored[number]
            records.append(
                EvaluationRecord(
                    pair=pair, violation_score=score, description=description,
                    run_id=run_id, batch_id=batch.batch_id,
                )
            )
    return records


def execute_batches(
    batches: list[Batch],
    card: ModelCard,
    document: PolicyDocument,
    context: str,
    session: GatewaySession,
    run_id: str,
    config: EngineConfig = EngineConfig(),
) -> list[EvaluationRecord]:
    """Run planned batches concurrently under the configured bound."""
    records: list[EvaluationRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, config.batch_parallelism)) as pool:
        for batch_records in pool.map(
            lambda b: _execute_batch(b, card, document, context, session, run_id, config),
            batches,
        ):
            records.extend(batch_records)
    return records


def _evaluate_policy(
    card: ModelCard,
    package: PolicyPackage,
    context_card: str,
    session: GatewaySession,
    run_id: str,
    config: EngineConfig,
) -> tuple[list[EvaluationRecord], list[ComparisonPair]]:
    document = package.document
    rmap = package.require_relevancy()
    validate_coverage(rmap, document)

    started = time.perf_counter()
    kept = kept_pairs(rmap)
    skipped = [
        ComparisonPair(section=s, policy_id=document.policy_id, article=a)
        for s, a in skipped_pairs(rmap)
    ]
    if not kept:
        session.ledger.add_wall_time(document.policy_id, "evaluate", 0.0)
        return [], skipped

    clusters = cluster_articles(document, session, config)
    batches = plan_batches(kept, clusters, document.policy_id, config)
    context = context_card + "\n\n" + render_markdown_table(document)
    records = execute_batches(batches, card, document, context, session, run_id, config)

    session.ledger.add_wall_time(
        document.policy_id, "evaluate", time.perf_counter() - started
    )
    return records, skipped


def evaluate_run(
    card: ModelCard,
    packages: list[PolicyPackage],
    provider: LlmProvider,
    config: EngineConfig = EngineConfig(),
    ledger: UsageLedger | None = None,
    run_id: str | None = None,
) -> ResultDataset:
    """Evaluate one card against every package; policies run in parallel.

    Every kept pair yields exactly one record (possibly unscored); skipped
    pairs come verbatim from each policy's relevance map and are never sent
    to the provider.
    """
    if not packages:
        raise ValueError("at least one policy package is required")
    ids = [p.policy_id for p in packages]
    if len(ids) != len(set(ids)):
        raise ValueError(f"duplicate policy ids in run: {ids}")

    session = GatewaySession(provider, ledger=ledger, cache=ContextCache())
    if run_id is None:
        run_id = compute_run_id(card, packages, type(provider).__name__, config)
    context_card = card.to_text()

    ordered = sorted(packages, key=lambda p: p.policy_id)
    workers = config.policy_parallelism or len(ordered)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(
            pool.map(
                lambda pkg: _evaluate_policy(card, pkg, context_card, session, run_id, config),
                ordered,
            )
        )

    records: list[EvaluationRecord] = []
    skipped: list[ComparisonPair] = []
    for pkg, (pkg_records, pkg_skipped) in zip(ordered, outcomes):
        index = pkg.document.article_index()
        records.extend(
            sorted(
                pkg_records,
                key=lambda r: (index[r.pair.article], SECTION_INDEX[r.pair.section]),
            )
        )
        skipped.extend(
            sorted(
                pkg_skipped,
                key=lambda p: (index[p.article], SECTION_INDEX[p.section]),
            )
        )

    expected = sum(len(SECTION_ORDER) * len(p.document.articles) for p in ordered)
    actual = len(records) + len(skipped)
    if actual != expected:
        raise RuntimeError(
            f"coverage violation: {len(records)} records + {len(skipped)} skipped != {expected}"
        )

    return ResultDataset(
        run_id=run_id,
        records=records,
        skipped=skipped,
        ledger=session.ledger,
        policy_ids=tuple(p.policy_id for p in ordered),
    )


def dataset_to_json(dataset: ResultDataset) -> str:
    """Canonical dataset serialization (used for byte-equality checks)."""
    return json.dumps(dataset.to_dict(), indent=2, ensure_ascii=False) + "\n"


def dataset_from_dict(data: dict, ledger: UsageLedger | None = None) -> ResultDataset:
    records = [
        EvaluationRecord(
            pair=ComparisonPair(
                section=SectionId(row["section"]),
                policy_id=row["policy_id"],
                article=row["article"],
            ),
            violation_score=row["score"],
            description=row["description"],
            run_id=data["run_id"],
            batch_id=row["batch_id"],
        )
        for row in data["records"]
    ]
    skipped = [
        ComparisonPair(
            section=SectionId(row["section"]),
            policy_id=row["policy_id"],
            article=row["article"],
        )
        for row in data["skipped"]
    ]
    return ResultDataset(
        run_id=data["run_id"],
        records=records,
        skipped=skipped,
        ledger=ledger or UsageLedger(),
        policy_ids=tuple(data.get("policy_ids", ())),
    )
