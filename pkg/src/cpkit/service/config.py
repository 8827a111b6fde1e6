"""Service configuration: stores, worker tokens, leases."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ServiceConfig:
    store_dir: str
    events_path: str
    workers: dict[str, str] = field(default_factory=dict)  # token -> worker id
    claim_lease_seconds: float = 600.0
    require_coarse_accept: bool = True

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        data = json.loads(Path(path).read_text("utf-8"))
        workers = {w["token"]: w["id"] for w in data.get("workers", [])}
        return cls(
            store_dir=data["store_dir"],
            events_path=data["events_path"],
            workers=workers,
            claim_lease_seconds=float(data.get("claim_lease_seconds", 600.0)),
            require_coarse_accept=bool(data.get("require_coarse_accept", True)),
        )
