"""Provider gateway: pluggable completion interface, mock provider,
context cache, retries, and the exact token/cost ledger.

Costs are computed with :class:`decimal.Decimal` so that linearity holds
exactly before display rounding. Rates are configuration (currency units
per million tokens), not constants.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Protocol

from . import prompts, segmentation
from .errors import MalformedResponse, ProviderError, RateLimited, Timeout


class ExpectedFormat(Enum):
    SCORE_TABLE = "score_table"
    SUMMARY_TEXT = "summary_text"
    GROUPING = "grouping"
    POLICY_TABLE = "policy_table"


@dataclass(frozen=True)
class ProviderRequest:
    """One completion request; the context part is cache-keyed by digest."""

    cached_context: str
    task_prompt: str
    expected_format: ExpectedFormat

    @property
    def context_digest(self) -> str:
        return hashlib.sha256(self.cached_context.encode()).hexdigest()


@dataclass(frozen=True)
class ProviderResult:
    text: str
    input_tokens: int
    output_tokens: int


class LlmProvider(Protocol):
    """Behavior contract: complete a request, report exact token counts."""

    def complete(self, request: ProviderRequest) -> ProviderResult: ...


# --- cost ledger ----------------------------------------------------------


@dataclass(frozen=True)
class RateConfig:
    """Currency units per million tokens."""

    input_per_million: Decimal = Decimal("3.00")
    output_per_million: Decimal = Decimal("15.00")

    @classmethod
    def from_dict(cls, d: dict) -> "RateConfig":
        return cls(
            input_per_million=Decimal(str(d.get("input_per_million", "3.00"))),
            output_per_million=Decimal(str(d.get("output_per_million", "15.00"))),
        )


@dataclass
class LedgerEntry:
    policy_id: str
    phase: str = "evaluate"
    request_count: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    cache_hits: int = 0
    wall_time: float = 0.0


def compute_cost(entry: LedgerEntry, rates: RateConfig) -> Decimal:
    """Exact linear cost of one entry at full precision."""
    return (
        entry.input_tokens * rates.input_per_million
        + entry.output_tokens * rates.output_per_million
    ) / Decimal(1_000_000)


def display_cost(amount: Decimal, decimals: int = 4) -> str:
    """Round half-up to the given number of decimal places for display."""
    quantum = Decimal(1).scaleb(-decimals)
    return str(amount.quantize(quantum, rounding=ROUND_HALF_UP))


class UsageLedger:
    """Per-(policy, phase) accounting of requests, tokens, and wall time.

    Thread-safe: every provider call increments exactly one entry.
    """

    def __init__(self, rates: RateConfig | None = None) -> None:
        self.rates = rates or RateConfig()
        self._entries: dict[tuple[str, str], LedgerEntry] = {}
        self._lock = threading.Lock()

    def _entry(self, policy_id: str, phase: str) -> LedgerEntry:
        key = (policy_id, phase)
        if key not in self._entries:
            self._entries[key] = LedgerEntry(policy_id=policy_id, phase=phase)
        return self._entries[key]

    def record(
        self,
        policy_id: str,
        phase: str,
        input_tokens: int,
        output_tokens: int,
        cache_hit: bool = False,
    ) -> None:
        with self._lock:
            entry = self._entry(policy_id, phase)
            entry.request_count += 1
            entry.input_tokens += input_tokens
            entry.output_tokens += output_tokens
            if cache_hit:
                entry.cache_hits += 1

    def add_wall_time(self, policy_id: str, phase: str, seconds: float) -> None:
        with self._lock:
            self._entry(policy_id, phase).wall_time += seconds

    def entries(self) -> list[LedgerEntry]:
        with self._lock:
            return sorted(
                self._entries.values(), key=lambda e: (e.policy_id, e.phase)
            )

    def total_requests(self) -> int:
        return sum(e.request_count for e in self.entries())

    def cost(self, entry: LedgerEntry) -> Decimal:
        return compute_cost(entry, self.rates)

    def snapshot(self, include_wall_time: bool = True) -> dict:
        """Serializable totals; wall time can be left out for deterministic files."""
        rows = []
        for entry in self.entries():
            row = {
                "policy_id": entry.policy_id,
                "phase": entry.phase,
                "requests": entry.request_count,
                "input_tokens": entry.input_tokens,
                "output_tokens": entry.output_tokens,
                "cache_hits": entry.cache_hits,
                "cost": display_cost(self.cost(entry)),
            }
            if include_wall_time:
                row["wall_time_s"] = round(entry.wall_time, 3)
            rows.append(row)
        total = LedgerEntry(policy_id="", phase="")
        for entry in self.entries():
            total.request_count += entry.request_count
            total.input_tokens += entry.input_tokens
            total.output_tokens += entry.output_tokens
        return {
            "rates": {
                "input_per_million": str(self.rates.input_per_million),
                "output_per_million": str(self.rates.output_per_million),
            },
            "entries": rows,
            "totals": {
                "requests": total.request_count,
                "input_tokens": total.input_tokens,
                "output_tokens": total.output_tokens,
                "cost": display_cost(compute_cost(total, self.rates)),
            },
        }

    @classmethod
    def from_snapshot(cls, snapshot: dict) -> "UsageLedger":
        """Rebuild a ledger from its serialized snapshot (costs recompute)."""
        ledger = cls(rates=RateConfig.from_dict(snapshot.get("rates", {})))
        for row in snapshot.get("entries", []):
            entry = LedgerEntry(
                policy_id=row["policy_id"],
                phase=row["phase"],
                request_count=row["requests"],
                input_tokens=row["input_tokens"],
                output_tokens=row["output_tokens"],
                cache_hits=row.get("cache_hits", 0),
                wall_time=row.get("wall_time_s", 0.0),
            )
            ledger._entries[(entry.policy_id, entry.phase)] = entry
        return ledger

    def to_table(self) -> str:
        """Markdown report mirroring the per-policy cost breakdown."""
        lines = [
            "| Policy | Phase | In Tokens | Out Tokens | Requests | Cost |",
            "| --- | --- | --- | --- | --- | --- |",
        ]
        for e in self.entries():
            lines.append(
                f"| {e.policy_id} | {e.phase} | {e.input_tokens} | {e.output_tokens} "
                f"| {e.request_count} | {display_cost(self.cost(e))} |"
            )
        return "\n".join(lines) + "\n"


# --- context cache --------------------------------------------------------


class ContextCache:
    """Content-addressed store for the large cached-context prompt part.

    Pricing discounts are deliberately not modeled; the cache only dedups
    storage and lets the ledger count hits. Writes are idempotent.
    """

    def __init__(self, spill_dir=None) -> None:
        self._seen: dict[str, int] = {}
        self._lock = threading.Lock()
        self._spill_dir = spill_dir

    def check(self, request: ProviderRequest) -> bool:
        """Record the request's context; True when the digest was seen before."""
        digest = request.context_digest
        with self._lock:
            hit = digest in self._seen
            self._seen[digest] = self._seen.get(digest, 0) + 1
        if not hit and self._spill_dir is not None:
            from pathlib import Path

            path = Path(self._spill_dir) / f"{digest}.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            if not path.exists():
                tmp = path.with_suffix(".tmp")
                tmp.write_text(request.cached_context, encoding="utf-8")
                tmp.replace(path)
        return hit

    @property
    def distinct_contexts(self) -> int:
        with self._lock:
            return len(self._seen)


# --- retry policy ---------------------------------------------------------


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.05
    multiplier: float = 2.0


def complete_with_retry(
    provider: LlmProvider, request: ProviderRequest, retry: RetryPolicy
) -> ProviderResult:
    """Retry transient failures (timeout / rate limit) with exponential backoff."""
    delay = retry.base_delay
    for attempt in range(1, retry.max_attempts + 1):
        try:
            return provider.complete(request)
        except (Timeout, RateLimited):
            if attempt == retry.max_attempts:
                raise
            time.sleep(delay)
            delay *= retry.multiplier
    raise ProviderError("unreachable")  # pragma: no cover


class GatewaySession:
    """Binds a provider to a ledger and context cache for one pipeline phase."""

    def __init__(
        self,
        provider: LlmProvider,
        ledger: UsageLedger | None = None,
        cache: ContextCache | None = None,
        retry: RetryPolicy = RetryPolicy(),
    ) -> None:
        self.provider = provider
        self.ledger = ledger or UsageLedger()
        self.cache = cache or ContextCache()
        self.retry = retry

    def complete(self, request: ProviderRequest, policy_id: str, phase: str) -> ProviderResult:
        hit = self.cache.check(request)
        result = complete_with_retry(self.provider, request, self.retry)
        self.ledger.record(
            policy_id, phase, result.input_tokens, result.output_tokens, cache_hit=hit
        )
        return result


# --- score table parsing --------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    """One parsed row: key column (article number or section name) + score."""

    article: str
    score: int
    description: str | None = None


_ROW_RE = re.compile(r"^\|(?P<key>[^|]+)\|(?P<payload>.+)\|\s*$")


def parse_score_table(text: str) -> list[ScoreRow]:
    """Parse provider score-table output into validated rows.

    Raises MalformedResponse on an empty table, non-JSON payloads, fractional
    or out-of-range scores, or a positive score without a description.
    """
    rows: list[ScoreRow] = []
    for line in text.splitlines():
        line = line.strip()
        match = _ROW_RE.match(line)
        if not match:
            continue
        key = match.group("key").strip()
        payload = match.group("payload").strip()
        if not key or key.lower() in {"article", "section", "evaluation"}:
            continue
        if set(key) <= {"-", ":", " "}:
            continue
        try:
            data = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"row payload is not JSON: {payload!r}") from exc
        if not isinstance(data, dict) or "score" not in data:
            raise MalformedResponse(f"row payload missing score: {payload!r}")
        score = data["score"]
        if isinstance(score, bool) or not isinstance(score, int):
            raise MalformedResponse(f"score must be an integer, got {score!r}")
        if not 0 <= score <= 5:
            raise MalformedResponse(f"score out of range 0-5: {score}")
        description = data.get("description")
        if description is not None and not isinstance(description, str):
            raise MalformedResponse(f"description must be text or null: {description!r}")
        if score > 0 and not description:
            raise MalformedResponse(f"score {score} requires a description (row {key})")
        rows.append(ScoreRow(article=key, score=score, description=description))
    if not rows:
        raise MalformedResponse("no score rows found")
    return rows


# --- mock provider --------------------------------------------------------

_SEVERITY_LADDER: tuple[tuple[str, int], ...] = (
    ("strictly prohibited", 5),
    ("expressly forbidden", 4),
    ("subject to penalty", 3),
    ("where applicable", 2),
    ("encouraged to", 1),
    ("for information only", 0),
)

_RATIONALE_STEMS = {
    1: "Minor clarification would strengthen the documentation against article {n}.",
    2: "The documentation is ambiguous about the obligations in article {n}.",
    3: "The documentation may permit outcomes that conflict with article {n}.",
    4: "The documentation probably conflicts with the requirements of article {n}.",
    5: "The documentation directly contradicts the requirements of article {n}.",
}

_THEME_LEXICON = ("data", "risk", "transparency", "oversight", "enforcement")


def _digest_score(*parts: str, salt: str = "", levels: int = 6) -> int:
    h = hashlib.sha256()
    h.update(salt.encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(part.encode())
    return h.digest()[0] % levels


def estimate_tokens(text: str) -> int:
    """Deterministic stand-in for provider tokenization: ceil(chars / 4)."""
    return math.ceil(len(text) / 4)


class MockProvider:
    """Deterministic offline provider: a pure function of request content.

    Violation scores come from a severity-phrase ladder over the article
    text; pairs without a ladder phrase hash to 0-3, so levels 4-5 belong
    exclusively to fixture-controlled phrases while arbitrary inputs still
    exercise every rubric level. An ``N/A`` section scores 2 (documentation
    ambiguity). Optional per-request latency injection supports wall-time
    shape tests. Calls are logged thread-safely for filter-fidelity
    assertions.
    """

    def __init__(self, latency: float = 0.0) -> None:
        self.latency = latency
        self.calls: list[ProviderRequest] = []
        self._lock = threading.Lock()

    # scoring rules -------------------------------------------------------

    @staticmethod
    def violation_score(section_content: str, article_text: str) -> int:
        if section_content.strip() == "N/A":
            return 2
        lowered = article_text.lower()
        for phrase, score in _SEVERITY_LADDER:
            if phrase in lowered:
                return score
        return _digest_score(section_content, article_text, salt="violation", levels=4)

    @staticmethod
    def relevance_score(section_content: str, article_text: str) -> int:
        return _digest_score(section_content, article_text, salt="relevance")

    # completion ----------------------------------------------------------

    def complete(self, request: ProviderRequest) -> ProviderResult:
        with self._lock:
            self.calls.append(request)
        if self.latency:
            time.sleep(self.latency)
        text = self._respond(request)
        full_input = request.cached_context + "\n" + request.task_prompt
        return ProviderResult(
            text=text,
            input_tokens=estimate_tokens(full_input),
            output_tokens=estimate_tokens(text),
        )

    def _respond(self, request: ProviderRequest) -> str:
        fmt = request.expected_format
        if fmt is ExpectedFormat.SCORE_TABLE:
            return self._score_table(request.task_prompt)
        if fmt is ExpectedFormat.GROUPING:
            return self._grouping(request.task_prompt)
        if fmt is ExpectedFormat.POLICY_TABLE:
            source = prompts.extract_source(request.task_prompt)
            return segmentation.render_article_rows(segmentation.segment_text(source))
        return self._summary(request.task_prompt)

    def _score_table(self, prompt: str) -> str:
        sections, articles = prompts.split_marked_blocks(prompt)
        lines = ["| Article | Evaluation |", "| --- | --- |"]
        if prompt.startswith(prompts.RELEVANCE_RUBRIC):
            number, article_text = articles[0]
            lines = ["| Section | Evaluation |", "| --- | --- |"]
            for name, content in sections:
                score = self.relevance_score(content, article_text)
                payload = {"score": score, "description": None}
                if score > 0:
                    payload["description"] = (
                        f"Contributes (level {score}) to assessing article {number}."
                    )
                lines.append(f"| {name} | {json.dumps(payload)} |")
            return "\n".join(lines)
        name, section_content = sections[0]
        for number, article_text in articles:
            score = self.violation_score(section_content, article_text)
            payload: dict = {"score": score, "description": None}
            if score > 0:
                payload["description"] = _RATIONALE_STEMS[score].format(n=number)
            lines.append(f"| {number} | {json.dumps(payload)} |")
        return "\n".join(lines)

    def _grouping(self, prompt: str) -> str:
        _, articles = prompts.split_marked_blocks(prompt)
        clusters: list[list[str]] = []
        themes: list[str] = []
        for number, text in articles:
            lowered = text.lower()
            theme = next((w for w in _THEME_LEXICON if w in lowered), "general")
            if themes and themes[-1] == theme:
                clusters[-1].append(number)
            else:
                clusters.append([number])
                themes.append(theme)
        return json.dumps(clusters)

    def _summary(self, prompt: str) -> str:
        table = prompts.extract_table(prompt)
        rows = [ln for ln in table.splitlines() if ln.strip().startswith("|")]
        n = max(0, len(rows) - 2)
        if prompt.startswith("Suggest concrete documentation fixes"):
            sections, _ = prompts.split_marked_blocks(prompt)
            name = sections[0][0] if sections else "the section"
            if n == 0:
                return f"- No changes needed for {name}."
            return "\n".join(
                f"- Revise {name} to resolve finding {i + 1} of {n} listed above."
                for i in range(min(n, 3))
            )
        if n == 0:
            return "No violations detected; documentation aligns with the reviewed articles."
        return (
            f"Automated review identified {n} prioritized finding(s); "
            "the most severe rows in the table above warrant documentation updates first."
        )


# --- live provider --------------------------------------------------------


@dataclass(frozen=True)
class ProviderConfig:
    """Provider wiring loaded from a JSON config file; credentials stay in env."""

    kind: str = "mock"
    endpoint: str = ""
    credentials_env: str = "POLICHECK_API_KEY"
    rates: RateConfig = field(default_factory=RateConfig)
    parallelism: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    mock_latency: float = 0.0

    @classmethod
    def from_file(cls, path) -> "ProviderConfig":
        from pathlib import Path

        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            kind=data.get("kind", "mock"),
            endpoint=data.get("endpoint", ""),
            credentials_env=data.get("credentials_env", "POLICHECK_API_KEY"),
            rates=RateConfig.from_dict(data.get("rates", {})),
            parallelism=int(data.get("parallelism", 4)),
            retry=RetryPolicy(**data.get("retry", {})),
            mock_latency=float(data.get("mock_latency", 0.0)),
        )


class HttpProvider:
    """Plain JSON-over-HTTP completion client.

    Expects the endpoint to accept {"context", "prompt", "format"} and reply
    {"text", "input_tokens", "output_tokens"}. No vendor-specific features.
    """

    def __init__(self, config: ProviderConfig) -> None:
        import httpx

        self.config = config
        key = os.environ.get(config.credentials_env, "")
        headers = {"authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(headers=headers, timeout=60.0)

    def complete(self, request: ProviderRequest) -> ProviderResult:
        import httpx

        try:
            response = self._client.post(
                self.config.endpoint,
                json={
                    "context": request.cached_context,
                    "prompt": request.task_prompt,
                    "format": request.expected_format.value,
                },
            )
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        if response.status_code == 429:
            raise RateLimited(f"{self.config.endpoint} returned 429")
        if response.status_code >= 500:
            raise Timeout(f"{self.config.endpoint} returned {response.status_code}")
        if response.status_code != 200:
            raise ProviderError(f"{self.config.endpoint} returned {response.status_code}")
        try:
            data = response.json()
            return ProviderResult(
                text=data["text"],
                input_tokens=int(data["input_tokens"]),
                output_tokens=int(data["output_tokens"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad provider payload: {exc}") from exc


def make_provider(config: ProviderConfig) -> LlmProvider:
    if config.kind == "mock":
        return MockProvider(latency=config.mock_latency)
    if config.kind == "http":
        return HttpProvider(config)
    raise ValueError(f"unknown provider kind: {config.kind!r}")
