from __future__ import annotations

import json
import re
import shutil
import subprocess
import sys
import time

import httpx
import pytest
from click.testing import CliRunner

from policheck import fixture_path
from policheck.cli import main

from oracles import oracle_mae, oracle_median, oracle_spearman


@pytest.fixture()
def runner():
    return CliRunner()


def ingest(runner, tmp_path, policy="policy_adaa.txt", policy_id="ADAA"):
    out = tmp_path / f"pkg_{policy_id.lower()}"
    result = runner.invoke(
        main,
        [
            "ingest-policy", "--id", policy_id, "--name", f"Synthetic {policy_id}",
            "--jurisdiction", "test", "--source", str(fixture_path(policy)),
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    return out


def build_relevancy(runner, tmp_path, pkg_dir):
    cards_dir = tmp_path / "cards"
    cards_dir.mkdir(exist_ok=True)
    for name in ("card_crop_monitor.md", "card_harvest_insight.md"):
        shutil.copy(fixture_path(name), cards_dir / name)
    result = runner.invoke(
        main, ["build-relevancy", "--policy", str(pkg_dir), "--cards", str(cards_dir)]
    )
    assert result.exit_code == 0, result.output
    return result


def test_ingest_policy_creates_package(runner, tmp_path):
    out = ingest(runner, tmp_path)
    assert (out / "manifest.json").is_file()
    assert (out / "document.json").is_file()
    assert (out / "policy_table.md").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["policy_id"] == "ADAA"


def test_build_relevancy_reports_reduction(runner, tmp_path):
    out = ingest(runner, tmp_path)
    result = build_relevancy(runner, tmp_path, out)
    assert (out / "relevancy.json").is_file()
    assert re.search(r"\d+ kept, \d+ skipped \(\d+\.\d% reduction\)", result.output)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == 2  # relevancy build bumps the version


def evaluate(runner, tmp_path, out_name, pkg_dirs):
    out = tmp_path / out_name
    args = ["evaluate", "--card", str(fixture_path("card_crop_monitor.md")), "--out", str(out)]
    for pkg in pkg_dirs:
        args += ["--policies", str(pkg)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return out


def test_evaluate_then_report_is_deterministic(runner, tmp_path):
    pkg_a = ingest(runner, tmp_path, "policy_adaa.txt", "ADAA")
    pkg_b = ingest(runner, tmp_path, "policy_atc.txt", "ATC")
    build_relevancy(runner, tmp_path, pkg_a)
    build_relevancy(runner, tmp_path, pkg_b)

    run1 = evaluate(runner, tmp_path, "run1", [pkg_a, pkg_b])
    run2 = evaluate(runner, tmp_path, "run2", [pkg_a, pkg_b])
    assert (run1 / "dataset.json").read_bytes() == (run2 / "dataset.json").read_bytes()

    for run_dir in (run1, run2):
        result = runner.invoke(main, ["report", "--run", str(run_dir)])
        assert result.exit_code == 0, result.output
    assert (run1 / "report.json").read_bytes() == (run2 / "report.json").read_bytes()
    assert (run1 / "report.md").read_bytes() == (run2 / "report.md").read_bytes()

    report = json.loads((run1 / "report.json").read_text())
    assert set(report["heatmaps"]) == {"ADAA", "ATC"}


def test_invalid_card_fails_with_machine_readable_error(runner, tmp_path):
    bad_card = tmp_path / "bad.md"
    bad_card.write_text("## [General Information] System Name\nOnly one section\n")
    result = runner.invoke(
        main,
        ["evaluate", "--card", str(bad_card), "--policies", str(tmp_path), "--out", str(tmp_path / "o")],
    )
    assert result.exit_code != 0
    line = result.output.strip().splitlines()[-1]
    payload = json.loads(line)
    assert payload["error"] == "card failed validation"
    assert payload["report"]["missing"]


def test_metrics_command_matches_oracles(runner, tmp_path):
    out_file = tmp_path / "agreement.json"
    result = runner.invoke(
        main, ["metrics", "--ratings", str(fixture_path("ratings.csv")), "--out", str(out_file)]
    )
    assert result.exit_code == 0, result.output
    data = json.loads(out_file.read_text())
    assert set(data) == {"relevance", "violation"}

    import csv
    from collections import defaultdict

    rows = list(csv.DictReader(fixture_path("ratings.csv").read_text().splitlines()))
    by_item: dict[str, dict[str, int]] = defaultdict(dict)
    for row in rows:
        if row["dimension"] == "violation":
            by_item[row["item"]][row["rater"]] = int(row["score"])
    items = sorted(by_item)
    truth = [
        oracle_median([float(v) for r, v in by_item[i].items() if r != "engine"])
        for i in items
    ]
    pred = [float(by_item[i]["engine"]) for i in items]
    assert data["violation"]["spearman"]["rho"] == pytest.approx(
        oracle_spearman(pred, truth), abs=1e-9
    )
    assert data["violation"]["mae"] == pytest.approx(oracle_mae(pred, truth), abs=1e-9)


def test_metrics_plot_data_export(runner, tmp_path):
    plot_file = tmp_path / "plot.csv"
    result = runner.invoke(
        main,
        ["metrics", "--ratings", str(fixture_path("ratings.csv")),
         "--out", str(tmp_path / "a.json"), "--plot-data", str(plot_file)],
    )
    assert result.exit_code == 0, result.output
    lines = plot_file.read_text().splitlines()
    assert lines[0] == "dimension,series,x,y"
    series = {line.split(",")[1] for line in lines[1:]}
    assert series == {"abs_error_histogram", "consensus_vs_engine"}
    scatter_rows = [l for l in lines[1:] if "consensus_vs_engine" in l and l.startswith("violation")]
    assert len(scatter_rows) == 12  # one point per rated item


def test_metrics_rejects_malformed_ratings(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("wrong,header,entirely,here\n")
    result = runner.invoke(main, ["metrics", "--ratings", str(bad)])
    assert result.exit_code != 0
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert payload["error"] == "metrics failed"


def test_serve_binds_ephemeral_port_and_answers_health(tmp_path):
    process = subprocess.Popen(
        [sys.executable, "-m", "policheck.cli", "serve", "--store", str(tmp_path / "store"),
         "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        line = process.stdout.readline()
        match = re.search(r"listening on (http://127\.0\.0\.1:(\d+))", line)
        assert match, f"no port line: {line!r}"
        base, port = match.group(1), int(match.group(2))
        assert port > 0
        deadline = time.time() + 10
        last_error = None
        while time.time() < deadline:
            try:
                response = httpx.get(f"{base}/healthz", timeout=1.0)
                assert response.json() == {"status": "ok"}
                break
            except httpx.HTTPError as exc:
                last_error = exc
                time.sleep(0.1)
        else:
            raise AssertionError(f"service never came up: {last_error}")
    finally:
        process.terminate()
        process.wait(timeout=10)
