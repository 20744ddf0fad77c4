"""Content-addressed artifact store: cards/, policies/, runs/.

Plain directories instead of a database; every write is atomic
(temp file + rename) so a restarted service loses no completed run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorruptPackage
from .model_card import ModelCard, ValidationReport, parse_model_card
from .policy import PolicyPackage, load_package, save_package

RUN_STATUSES = ("pending", "running", "complete", "failed")


@dataclass
class RunRecord:
    run_id: str
    card_id: str
    policy_ids: list[str]
    status: str = "pending"
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    error: str | None = None
    created_at: float = field(default_factory=time.time)

    def advance(self, status: str) -> None:
        """Transitions are monotone: pending -> running -> complete|failed."""
        order = {s: i for i, s in enumerate(RUN_STATUSES)}
        if status not in order:
            raise ValueError(f"unknown status {status!r}")
        if order[status] < order[self.status]:
            raise ValueError(f"cannot move {self.status} -> {status}")
        self.status = status

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "card_id": self.card_id,
            "policy_ids": self.policy_ids,
            "status": self.status,
            "timings": self.timings,
            "artifacts": self.artifacts,
            "error": self.error,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            run_id=data["run_id"],
            card_id=data["card_id"],
            policy_ids=list(data["policy_ids"]),
            status=data["status"],
            timings=dict(data.get("timings", {})),
            artifacts=dict(data.get("artifacts", {})),
            error=data.get("error"),
            created_at=data.get("created_at", 0.0),
        )


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


class ArtifactStore:
    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        for sub in ("cards", "policies", "runs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # cards ---------------------------------------------------------------

    def save_card(self, card: ModelCard) -> str:
        _atomic_write(self.root / "cards" / f"{card.card_id}.md", card.to_text())
        return card.card_id

    def load_card(self, card_id: str) -> ModelCard:
        path = self.root / "cards" / f"{card_id}.md"
        if not path.is_file():
            raise FileNotFoundError(card_id)
        parsed = parse_model_card(path.read_text(encoding="utf-8"))
        if isinstance(parsed, ValidationReport):
            raise CorruptPackage(f"stored card {card_id} no longer validates")
        return parsed

    def list_cards(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "cards").glob("*.md"))

    # policies --------------------------------------------------------------

    def policy_dir(self, policy_id: str) -> Path:
        return self.root / "policies" / policy_id

    def save_policy(self, package: PolicyPackage) -> Path:
        return save_package(package, self.policy_dir(package.policy_id))

    def load_policy(self, policy_id: str, require_relevancy: bool = True) -> PolicyPackage:
        path = self.policy_dir(policy_id)
        if not (path / "manifest.json").is_file():
            raise FileNotFoundError(policy_id)
        return load_package(path, require_relevancy=require_relevancy)

    def list_policies(self) -> list[dict]:
        out = []
        for manifest_path in sorted((self.root / "policies").glob("*/manifest.json")):
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            document = json.loads(
                (manifest_path.parent / "document.json").read_text(encoding="utf-8")
            )
            out.append(
                {
                    "policy_id": manifest["policy_id"],
                    "full_name": document["full_name"],
                    "jurisdiction": document["jurisdiction"],
                    "version": manifest["version"],
                    "articles": len(document["articles"]),
                    "has_relevancy": "relevancy.json" in manifest.get("files", {}),
                }
            )
        return out

    # runs ------------------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def save_run_record(self, record: RunRecord) -> None:
        _atomic_write(
            self.run_dir(record.run_id) / "run.json",
            json.dumps(record.to_dict(), indent=2) + "\n",
        )

    def load_run_record(self, run_id: str) -> RunRecord:
        path = self.run_dir(run_id) / "run.json"
        if not path.is_file():
            raise FileNotFoundError(run_id)
        return RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_runs(self) -> list[RunRecord]:
        records = []
        for path in sorted((self.root / "runs").glob("*/run.json")):
            records.append(RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        return records

    def write_run_artifact(self, run_id: str, name: str, text: str) -> Path:
        path = self.run_dir(run_id) / name
        _atomic_write(path, text)
        return path

    def read_run_artifact(self, run_id: str, name: str) -> str:
        path = self.run_dir(run_id) / name
        if not path.is_file():
            raise FileNotFoundError(f"{run_id}/{name}")
        return path.read_text(encoding="utf-8")
