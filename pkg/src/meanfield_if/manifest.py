"""CSV writing and experiment manifests with content hashes."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import resource
import subprocess
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

OUTPUT_ENV = "MEANFIELD_IF_OUTPUT_DIR"


def output_dir(cli_value: str | None) -> Path:
    """CLI flag, else the environment variable, else ./out."""
    path = Path(cli_value or os.environ.get(OUTPUT_ENV) or "out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(path: Path, header, rows) -> Path:
    """Write rows with round-trip float formatting (deterministic bytes)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def version_string() -> str:
    """git-describe of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class ExperimentManifest:
    command: str
    argv: list
    config: dict
    seeds: list
    grid: dict
    outputs: dict = field(default_factory=dict)
    version: str = field(default_factory=version_string)
    wall_clock_s: float = 0.0
    peak_memory_kb: int = 0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add(self, path: Path) -> None:
        self.outputs[Path(path).name] = sha256_file(path)

    def write(self, outdir: Path) -> Path:
        self.wall_clock_s = time.perf_counter() - self._t0
        self.peak_memory_kb = int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss)
        d = asdict(self)
        d.pop("_t0")
        path = Path(outdir) / f"manifest_{self.command}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path
