"""HTTP service over the artifact store and evaluation pipeline.

The API is stateless above the store: every response is derived from
stored artifacts, so a restart loses no completed run. Runs execute
asynchronously in a bounded worker pool and clients poll run status.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .aggregate import build_report, report_to_json, report_to_markdown
from .engine import EngineConfig, dataset_to_json, evaluate_run
from .errors import EmptyDocument, ExtractionFailed, PolicheckError
from .gateway import GatewaySession, MockProvider, ProviderConfig, make_provider
from .model_card import (
    ValidationReport,
    parse_model_card,
    parse_model_card_csv,
    validate_model_card,
)
from .policy import PolicyPackage, structure_policy
from .relevancy import score_relevance
from .store import ArtifactStore, RunRecord


class PolicyIn(BaseModel):
    policy_id: str = Field(min_length=1, max_length=64)
    full_name: str
    jurisdiction: str = ""
    source_text: str = Field(min_length=1)
    calibration_card_ids: list[str] = []
    use_provider: bool = False


class CardIn(BaseModel):
    text: str | None = None
    csv: str | None = None
    title: str = ""


class RunIn(BaseModel):
    card_id: str
    policy_ids: list[str] = Field(min_length=1)
    provider: str = "mock"
    force: bool = False


def create_app(
    store_root: Path | str,
    provider_config: ProviderConfig | None = None,
    max_concurrent_runs: int = 2,
    engine_config: EngineConfig | None = None,
) -> FastAPI:
    store = ArtifactStore(store_root)
    config = provider_config or ProviderConfig()
    eng_config = engine_config or EngineConfig()
    app = FastAPI(title="policheck", version="0.1.0")
    executor = ThreadPoolExecutor(max_workers=max_concurrent_runs)
    active: dict[tuple[str, tuple[str, ...]], str] = {}
    active_lock = threading.Lock()

    def _provider_for(kind: str):
        if kind == "mock":
            return MockProvider(latency=config.mock_latency)
        if kind == "live":
            if config.kind != "http" or not config.endpoint:
                raise HTTPException(503, "no live provider configured")
            return make_provider(config)
        raise HTTPException(400, f"unknown provider {kind!r}")

    # --- health -----------------------------------------------------------

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    # --- policies ----------------------------------------------------------

    @app.post("/policies", status_code=201)
    def create_policy(payload: PolicyIn) -> dict:
        provider = _provider_for("mock") if payload.use_provider else None
        session = GatewaySession(provider) if provider else None
        try:
            document = structure_policy(
                payload.source_text,
                payload.policy_id,
                payload.full_name,
                payload.jurisdiction,
                session=session,
            )
        except (EmptyDocument, ExtractionFailed) as exc:
            raise HTTPException(400, str(exc)) from exc

        relevancy = None
        if payload.calibration_card_ids:
            cards = []
            for card_id in payload.calibration_card_ids:
                try:
                    cards.append(store.load_card(card_id))
                except FileNotFoundError:
                    raise HTTPException(404, f"unknown card {card_id!r}") from None
            relevancy = score_relevance(
                cards, document, GatewaySession(_provider_for("mock"))
            )
        package = PolicyPackage(document=document, relevancy=relevancy, version=1)
        store.save_policy(package)
        return {
            "policy_id": package.policy_id,
            "articles": len(document.articles),
            "has_relevancy": relevancy is not None,
        }

    @app.get("/policies")
    def list_policies() -> list[dict]:
        return store.list_policies()

    # --- cards --------------------------------------------------------------

    @app.post("/cards", status_code=201)
    def create_card(payload: CardIn) -> dict:
        if payload.text is None and payload.csv is None:
            raise HTTPException(400, "provide either 'text' or 'csv'")
        if payload.text is not None:
            parsed = parse_model_card(payload.text)
        else:
            parsed = parse_model_card_csv(payload.csv or "", title=payload.title)
        if isinstance(parsed, ValidationReport):
            raise HTTPException(400, detail=parsed.to_dict())
        card_id = store.save_card(parsed)
        warnings = validate_model_card(parsed.to_text()).warnings
        return {"card_id": card_id, "title": parsed.title, "warnings": warnings}

    # --- runs ----------------------------------------------------------------

    def _execute(record: RunRecord, provider_kind: str) -> None:
        key = (record.card_id, tuple(sorted(record.policy_ids)))
        try:
            record.advance("running")
            store.save_run_record(record)
            started = time.perf_counter()

            card = store.load_card(record.card_id)
            packages = [store.load_policy(pid) for pid in record.policy_ids]
            provider = _provider_for(provider_kind)

            dataset = evaluate_run(card, packages, provider, eng_config, run_id=record.run_id)
            evaluated = time.perf_counter()
            documents = {p.policy_id: p.document for p in packages}
            report = build_report(card, documents, dataset, provider, eng_config)
            finished = time.perf_counter()

            store.write_run_artifact(record.run_id, "dataset.json", dataset_to_json(dataset))
            store.write_run_artifact(
                record.run_id,
                "ledger.json",
                json.dumps(dataset.ledger.snapshot(), indent=2) + "\n",
            )
            store.write_run_artifact(record.run_id, "report.json", report_to_json(report))
            store.write_run_artifact(record.run_id, "report.md", report_to_markdown(report))

            record.timings = {
                "evaluate_s": round(evaluated - started, 3),
                "summarize_s": round(finished - evaluated, 3),
                "total_s": round(finished - started, 3),
            }
            record.artifacts = {
                name: name
                for name in ("dataset.json", "ledger.json", "report.json", "report.md")
            }
            record.advance("complete")
        except Exception as exc:  # failures land in the record, not the worker
            record.error = f"{type(exc).__name__}: {exc}"
            record.advance("failed")
        finally:
            store.save_run_record(record)
            with active_lock:
                if active.get(key) == record.run_id:
                    del active[key]

    @app.post("/runs", status_code=202)
    def create_run(payload: RunIn) -> dict:
        try:
            store.load_card(payload.card_id)
        except (FileNotFoundError, PolicheckError):
            raise HTTPException(404, f"unknown card {payload.card_id!r}") from None
        for pid in payload.policy_ids:
            try:
                store.load_policy(pid, require_relevancy=False)
            except FileNotFoundError:
                raise HTTPException(404, f"unknown policy {pid!r}") from None
            except PolicheckError as exc:
                raise HTTPException(400, str(exc)) from exc
            try:
                store.load_policy(pid)
            except PolicheckError as exc:
                raise HTTPException(400, f"policy {pid!r} is not evaluable: {exc}") from exc

        if payload.provider == "live":
            _provider_for("live")  # raises 503 when unconfigured
        elif payload.provider != "mock":
            raise HTTPException(400, f"unknown provider {payload.provider!r}")

        key = (payload.card_id, tuple(sorted(payload.policy_ids)))
        with active_lock:
            existing = active.get(key)
            if existing and not payload.force:
                raise HTTPException(
                    409, f"run {existing} already in progress for this card and policy set"
                )
            run_id = f"{payload.card_id[:20]}-{int(time.time() * 1000):x}-{len(active)}"
            record = RunRecord(
                run_id=run_id, card_id=payload.card_id, policy_ids=list(payload.policy_ids)
            )
            active[key] = run_id
        store.save_run_record(record)
        executor.submit(_execute, record, payload.provider)
        return {"run_id": record.run_id, "status": record.status}

    @app.get("/runs")
    def list_runs() -> list[dict]:
        return [r.to_dict() for r in store.list_runs()]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        try:
            return store.load_run_record(run_id).to_dict()
        except FileNotFoundError:
            raise HTTPException(404, f"unknown run {run_id!r}") from None

    def _run_artifact(run_id: str, name: str) -> dict:
        try:
            record = store.load_run_record(run_id)
        except FileNotFoundError:
            raise HTTPException(404, f"unknown run {run_id!r}") from None
        if record.status != "complete":
            raise HTTPException(404, f"run {run_id} is {record.status}, artifact not ready")
        return json.loads(store.read_run_artifact(run_id, name))

    @app.get("/runs/{run_id}/report")
    def get_report(run_id: str) -> dict:
        return _run_artifact(run_id, "report.json")

    @app.get("/runs/{run_id}/ledger")
    def get_ledger(run_id: str) -> dict:
        return _run_artifact(run_id, "ledger.json")

    @app.get("/runs/{run_id}/heatmap/{policy_id}")
    def get_heatmap(run_id: str, policy_id: str) -> dict:
        report = _run_artifact(run_id, "report.json")
        heatmap = report["heatmaps"].get(policy_id)
        if heatmap is None:
            raise HTTPException(404, f"policy {policy_id!r} not in run {run_id}")
        return heatmap

    @app.get("/runs/{run_id}/issues")
    def get_issues(run_id: str, policy: str | None = Query(default=None)) -> dict:
        report = _run_artifact(run_id, "report.json")
        rows = report["sections"]
        if policy is not None:
            if policy not in report["policy_ids"]:
                raise HTTPException(404, f"policy {policy!r} not in run {run_id}")
            rows = [
                {**row, "issues": [i for i in row["issues"] if i["policy_id"] == policy]}
                for row in rows
            ]
        return {"run_id": run_id, "policy": policy, "rows": rows}

    app.state.store = store
    return app
