"""Deterministic CSV/JSON emission and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from pathlib import Path

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.17g}"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_hash(identity: dict) -> str:
    """Hash of everything that determines a run's outputs (no timestamps)."""
    blob = json.dumps(identity, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def csv_text(columns, rows, header: dict) -> str:
    lines = [f"# {key}: {value}" for key, value in header.items()]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_header(path: Path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            out[key] = value
    return out


class Emitter:
    """Writes output files under ``outdir`` and records them in the manifest."""

    def __init__(self, outdir, identity: dict):
        self.outdir = Path(outdir)
        self.identity = identity
        self.hash = run_hash(identity)
        self.files: list[str] = []

    def csv(self, name, columns, rows, header: dict) -> Path:
        full = {"run_hash": self.hash, "tool": f"heatflux {__version__}"}
        full.update(header)
        return self._write(name, csv_text(columns, rows, full))

    def json(self, name, obj: dict) -> Path:
        obj = dict(obj)
        obj["run_hash"] = self.hash
        return self._write(name, json_text(obj))

    def _write(self, name, text) -> Path:
        path = self.outdir / name
        atomic_write(path, text)
        self.files.append(name)
        return path

    def manifest(self) -> Path:
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        stamp = float(epoch) if epoch else time.time()
        manifest = {
            "schema_version": 1,
            "tool_version": __version__,
            "run_hash": self.hash,
            "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp)),
            "files": list(self.files),
        }
        manifest.update(self.identity)
        path = self.outdir / "run_manifest.json"
        atomic_write(path, json_text(manifest))
        return path
