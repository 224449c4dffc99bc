"""Reproducibility manifests written beside every CLI output.

A manifest captures everything needed to reproduce a run: tool
version, the effective configuration, SHA-256 digests of the inputs,
and the RNG seeds. Timing fields (wall clock, achieved MEPS) vary
between reruns; all data outputs are byte-identical for equal inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)       # path -> sha256
    seeds: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    meps: float | None = None
    tool: str = "evfilt"
    version: str = __version__

    def write(self, out_path) -> Path:
        """Write the manifest as ``<out_path>.manifest.json``."""
        path = Path(str(out_path) + ".manifest.json")
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, out_path) -> "RunManifest":
        path = Path(str(out_path) + ".manifest.json")
        data = json.loads(path.read_text())
        data.pop("tool", None)
        version = data.pop("version", __version__)
        m = cls(**data)
        m.version = version
        return m


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
