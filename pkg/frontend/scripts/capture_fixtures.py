"""Regenerate the frontend test fixtures from a fixture-backed service.

Runs the bundled demo card and mini policies through the real HTTP app
(mock provider, so output is deterministic) and freezes the responses the
UI tests replay. Run from the repository root:

    python frontend/scripts/capture_fixtures.py
"""

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from policheck import fixture_path
from policheck.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as root:
        with TestClient(create_app(root)) as client:
            card_text = fixture_path("card_crop_monitor.md").read_text(encoding="utf-8")
            card_id = client.post("/cards", json={"text": card_text}).json()["card_id"]
            client.post(
                "/cards",
                json={"text": fixture_path("card_harvest_insight.md").read_text(encoding="utf-8")},
            )
            for policy_id, name, source in (
                ("ADAA", "Automated Decision Accountability Act", "policy_adaa.txt"),
                ("ATC", "Algorithmic Transparency Code", "policy_atc.txt"),
            ):
                response = client.post(
                    "/policies",
                    json={
                        "policy_id": policy_id,
                        "full_name": name,
                        "jurisdiction": "synthetic",
                        "source_text": fixture_path(source).read_text(encoding="utf-8"),
                        "calibration_card_ids": [card_id],
                    },
                )
                response.raise_for_status()

            run_id = client.post(
                "/runs", json={"card_id": card_id, "policy_ids": ["ADAA", "ATC"]}
            ).json()["run_id"]
            while True:
                record = client.get(f"/runs/{run_id}").json()
                if record["status"] in ("complete", "failed"):
                    break
                time.sleep(0.05)
            assert record["status"] == "complete", record

            def dump(name: str, data: object) -> None:
                path = OUT / name
                path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n")
                print(f"wrote {path}")

            dump("policies.json", client.get("/policies").json())
            dump("run_record.json", record)
            dump("report.json", client.get(f"/runs/{run_id}/report").json())
            dump("heatmap_atc.json", client.get(f"/runs/{run_id}/heatmap/ATC").json())
            dump("issues_all.json", client.get(f"/runs/{run_id}/issues").json())
            dump(
                "issues_adaa.json",
                client.get(f"/runs/{run_id}/issues", params={"policy": "ADAA"}).json(),
            )


if __name__ == "__main__":
    main()
