"""Run manifests: resolved parameters + input digests for reproducibility.

Every CLI command writes one next to its output artifact; re-running with
the same manifest reproduces byte-identical algorithmic outputs (timestamp
and timing fields excepted).
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    params: dict
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    version: str = ""
    timestamp: str = ""

    @classmethod
    def create(cls, command: str, params: dict,
               input_paths: list[str | Path] | None = None,
               seed: int | None = None) -> "RunManifest":
        from . import __version__
        inputs = {str(p): _sha256(p) for p in (input_paths or [])}
        return cls(
            command=command,
            params=params,
            inputs=inputs,
            seed=seed,
            version=__version__,
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        )

    def write(self, path: str | Path) -> None:
        payload = {
            "command": self.command,
            "params": self.params,
            "inputs": self.inputs,
            "seed": self.seed,
            "version": self.version,
            "timestamp": self.timestamp,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def manifest_path_for(artifact: str | Path) -> Path:
    """Sidecar manifest path: <artifact>.manifest.json (or manifest.json
    inside a directory artifact)."""
    p = Path(artifact)
    if p.is_dir():
        return p / "manifest.json"
    return p.with_name(p.name + ".manifest.json")
