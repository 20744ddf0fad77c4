"""Command-line interface: each verb is a thin wrapper over one module.

Exit code 0 on success; anything else prints a single machine-readable
JSON error line on stderr and exits nonzero.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .aggregate import build_report, report_to_json, report_to_markdown
from .engine import EngineConfig, dataset_from_dict, dataset_to_json, evaluate_run
from .errors import PolicheckError
from .gateway import (
    GatewaySession,
    MockProvider,
    ProviderConfig,
    UsageLedger,
    make_provider,
)
from .metrics import build_agreement_report, load_ratings_csv
from .model_card import ModelCard, ValidationReport, load_model_card
from .policy import PolicyPackage, load_package, save_package, structure_policy
from .prompts import PROMPT_VERSION
from .relevancy import Thresholds, score_relevance


def _fail(code: int, error: str, **details) -> None:
    click.echo(json.dumps({"error": error, **details}), err=True)
    sys.exit(code)


def _provider(provider: str, config_path: str | None):
    if config_path:
        config = ProviderConfig.from_file(config_path)
    else:
        config = ProviderConfig()
    if provider == "mock":
        return MockProvider(latency=config.mock_latency), config
    if provider == "live":
        if config.kind == "mock":
            _fail(2, "live provider requested but config kind is mock", config=config_path)
        return make_provider(config), config
    _fail(2, f"unknown provider {provider!r}")


def _load_card_or_fail(path: str) -> ModelCard:
    try:
        parsed = load_model_card(path)
    except OSError as exc:
        _fail(2, "cannot read card", path=path, cause=str(exc))
    if isinstance(parsed, ValidationReport):
        _fail(3, "card failed validation", path=path, report=parsed.to_dict())
    return parsed


@click.group()
def main() -> None:
    """Multi-policy compliance evaluation for AI system documentation."""


@main.command("ingest-policy")
@click.option("--id", "policy_id", required=True)
@click.option("--name", "full_name", required=True)
@click.option("--jurisdiction", default="")
@click.option("--source", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--provider", default="none", type=click.Choice(["none", "mock", "live"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def ingest_policy(policy_id, full_name, jurisdiction, source, out, provider, config_path):
    """Normalize a raw policy file into a package directory."""
    raw = Path(source).read_text(encoding="utf-8")
    session = None
    if provider != "none":
        prov, _ = _provider(provider, config_path)
        session = GatewaySession(prov)
    try:
        document = structure_policy(raw, policy_id, full_name, jurisdiction, session=session)
        package = PolicyPackage(document=document, relevancy=None, version=1)
        save_package(package, out)
    except PolicheckError as exc:
        _fail(4, "ingestion failed", path=source, cause=str(exc))
    paragraphs = sum(len(a.paragraphs) for a in document.articles)
    click.echo(
        f"ingested {policy_id}: {len(document.articles)} articles, "
        f"{paragraphs} paragraphs -> {out}"
    )
    if session is not None:
        click.echo(session.ledger.to_table())


@main.command("build-relevancy")
@click.option("--policy", "policy_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--cards", "cards_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False))
@click.option("--skip-threshold", default=1.0, show_default=True)
@click.option("--variance-threshold", default=1.5, show_default=True)
@click.option("--provider", default="mock", type=click.Choice(["mock", "live"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def build_relevancy(
    policy_dir, cards_dir, out, skip_threshold, variance_threshold, provider, config_path
):
    """Score section-article relevance with calibration cards; write the map."""
    card_paths = sorted(
        p for p in Path(cards_dir).iterdir() if p.suffix.lower() in {".md", ".csv"}
    )
    if not card_paths:
        _fail(2, "no calibration cards found", path=cards_dir)
    cards = [_load_card_or_fail(str(p)) for p in card_paths]
    prov, _ = _provider(provider, config_path)
    session = GatewaySession(prov)
    try:
        package = load_package(policy_dir, require_relevancy=False)
        rmap = score_relevance(
            cards,
            package.document,
            session,
            thresholds=Thresholds(skip=skip_threshold, variance=variance_threshold),
        )
        package.relevancy = rmap
        package.version += 1
        save_package(package, out or policy_dir)
    except PolicheckError as exc:
        _fail(4, "relevancy build failed", path=policy_dir, cause=str(exc))
    counts = rmap.counts()
    click.echo(
        f"relevancy for {package.policy_id}: {counts['total']} pairs, "
        f"{counts['kept']} kept, {counts['skipped']} skipped "
        f"({rmap.reduction_percent():.1f}% reduction), "
        f"{counts['flagged_for_review']} flagged for review"
    )


@main.command("evaluate")
@click.option("--card", "card_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policies", "policy_dirs", required=True, multiple=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--provider", default="mock", type=click.Choice(["mock", "live"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--max-batch", default=15, show_default=True)
@click.option("--target-batch", default=12, show_default=True)
def evaluate(card_path, policy_dirs, out, provider, config_path, max_batch, target_batch):
    """Run the pairwise evaluation and write the result dataset."""
    card = _load_card_or_fail(card_path)
    prov, prov_config = _provider(provider, config_path)
    engine_config = EngineConfig(max_batch=max_batch, target_batch=target_batch,
                                 batch_parallelism=prov_config.parallelism)
    try:
        packages = [load_package(p) for p in policy_dirs]
        ledger = UsageLedger(rates=prov_config.rates)
        dataset = evaluate_run(card, packages, prov, engine_config, ledger=ledger)
    except PolicheckError as exc:
        _fail(4, "evaluation failed", cause=str(exc))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "dataset.json").write_text(dataset_to_json(dataset), encoding="utf-8")
    (out_dir / "ledger.json").write_text(
        json.dumps(dataset.ledger.snapshot(), indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "card.md").write_text(card.to_text(), encoding="utf-8")
    (out_dir / "run.json").write_text(
        json.dumps(
            {
                "run_id": dataset.run_id,
                "prompt_version": PROMPT_VERSION,
                "card": "card.md",
                "policy_dirs": [str(Path(p).resolve()) for p in policy_dirs],
                "provider": provider,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(
        f"run {dataset.run_id}: {len(dataset.records)} records, "
        f"{len(dataset.skipped)} skipped, {dataset.ledger.total_requests()} requests -> {out}"
    )
    click.echo(dataset.ledger.to_table())


@main.command("report")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--provider", default="mock", type=click.Choice(["mock", "live"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--issue-threshold", default=2, show_default=True)
def report(run_dir, provider, config_path, issue_threshold):
    """Aggregate a result dataset into report.json and report.md."""
    run_path = Path(run_dir)
    try:
        manifest = json.loads((run_path / "run.json").read_text(encoding="utf-8"))
        dataset_data = json.loads((run_path / "dataset.json").read_text(encoding="utf-8"))
        ledger = UsageLedger.from_snapshot(
            json.loads((run_path / "ledger.json").read_text(encoding="utf-8"))
        )
        card = _load_card_or_fail(str(run_path / manifest["card"]))
        packages = [load_package(p) for p in manifest["policy_dirs"]]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        _fail(2, "run directory unreadable", path=run_dir, cause=str(exc))
    except PolicheckError as exc:
        _fail(4, "package load failed", path=run_dir, cause=str(exc))

    prov, _ = _provider(provider, config_path)
    dataset = dataset_from_dict(dataset_data, ledger=ledger)
    documents = {p.policy_id: p.document for p in packages}
    result = build_report(
        card, documents, dataset, prov, EngineConfig(issue_threshold=issue_threshold)
    )
    (run_path / "report.json").write_text(report_to_json(result), encoding="utf-8")
    (run_path / "report.md").write_text(report_to_markdown(result), encoding="utf-8")
    issues = sum(len(row.issues) for row in result.issue_fix_rows)
    click.echo(f"report for {result.run_id}: {issues} issues across "
               f"{len(result.policy_ids)} policies -> {run_path / 'report.json'}")


@main.command("metrics")
@click.option("--ratings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@click.option("--plot-data", default=None, type=click.Path(dir_okay=False),
              help="Also export histogram/scatter series as CSV for external plotting.")
def metrics(ratings, out, plot_data):
    """Agreement report (engine vs. human raters) from a ratings CSV."""
    try:
        matrices = load_ratings_csv(Path(ratings).read_text(encoding="utf-8"))
        reports = {
            dim: build_agreement_report(matrix, dim).to_dict()
            for dim, matrix in sorted(matrices.items())
        }
    except (ValueError, PolicheckError) as exc:
        _fail(4, "metrics failed", path=ratings, cause=str(exc))
    payload = json.dumps(reports, indent=2) + "\n"
    if out:
        Path(out).write_text(payload, encoding="utf-8")
        click.echo(f"agreement report -> {out}")
    else:
        click.echo(payload, nl=False)
    if plot_data:
        lines = ["dimension,series,x,y"]
        for dim, rep in sorted(reports.items()):
            for err, count in sorted(rep["error_histogram"].items()):
                lines.append(f"{dim},abs_error_histogram,{err},{count}")
            for truth, pred in rep["scatter"]:
                lines.append(f"{dim},consensus_vs_engine,{truth},{pred}")
        Path(plot_data).write_text("\n".join(lines) + "\n", encoding="utf-8")
        click.echo(f"plot data -> {plot_data}")
    for dim, rep in reports.items():
        click.echo(
            f"{dim}: rho={rep['spearman']['rho']:.4f} "
            f"ci=[{rep['spearman']['ci95'][0]:.4f}, {rep['spearman']['ci95'][1]:.4f}] "
            f"mae={rep['mae']:.3f} within1={rep['within_one_fraction']:.4f}",
            err=True,
        )


@main.command("serve")
@click.option("--store", "store_root", default=None, type=click.Path(file_okay=False),
              envvar="POLICHECK_STORE", help="Artifact root (env: POLICHECK_STORE).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, help="0 binds an ephemeral port")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              envvar="POLICHECK_PROVIDER_CONFIG",
              help="Provider/rate config (env: POLICHECK_PROVIDER_CONFIG).")
@click.option("--max-runs", default=2, show_default=True)
def serve(store_root, host, port, config_path, max_runs):
    """Start the HTTP service over an artifact store."""
    import socket

    import uvicorn

    from .service import create_app

    if not store_root:
        _fail(2, "no artifact store given (use --store or POLICHECK_STORE)")
    provider_config = ProviderConfig.from_file(config_path) if config_path else None
    app = create_app(store_root, provider_config, max_concurrent_runs=max_runs)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    bound_port = sock.getsockname()[1]
    click.echo(f"listening on http://{host}:{bound_port}", nl=True)
    sys.stdout.flush()
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])


if __name__ == "__main__":
    main()
