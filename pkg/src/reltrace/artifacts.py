"""CSV outputs, run manifests and atomic file writes.

Every CSV starts with a comment line carrying the schema version and the
run digest (a hash of subcommand plus full parameter set), then a header
row of ``name[unit]`` columns.  Values are written with ``repr`` so that a
rerun with the same parameters is byte-identical.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_digest(subcommand: str, parameters: dict) -> str:
    text = json.dumps({"subcommand": subcommand, "parameters": parameters, "schema": SCHEMA_VERSION},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def format_csv(columns, rows, subcommand: str, digest: str) -> str:
    buf = io.StringIO()
    buf.write(f"# reltrace {subcommand} schema={SCHEMA_VERSION} manifest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(f"{name}[{unit}]" for name, unit in columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row width does not match the header")
        w.writerow(_cell(v) for v in row)
    return buf.getvalue()


def write_csv(path, columns, rows, subcommand: str, digest: str) -> Path:
    path = Path(path)
    atomic_write_bytes(path, format_csv(columns, rows, subcommand, digest).encode())
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    atomic_write_bytes(path, (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode())
    return path


def read_csv(path) -> dict:
    """Columns of a CSV written by ``write_csv`` keyed by bare name (units dropped)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#")) if r]
    if not rows:
        raise ValueError(f"{path}: no header row")
    names = [c.split("[", 1)[0].strip() for c in rows[0]]
    cols = {n: [] for n in names}
    for r in rows[1:]:
        for n, v in zip(names, r):
            cols[n].append(v)
    return cols


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    version: str
    started: str
    finished: str = ""
    status: int = 0
    outputs: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return run_digest(self.subcommand, self.parameters)

    def to_json(self) -> str:
        d = asdict(self)
        d["digest"] = self.digest
        d["schema"] = SCHEMA_VERSION
        return json.dumps(d, sort_keys=True)


def append_manifest(out_dir, manifest: RunManifest) -> Path:
    """Append one JSON line; the file is rewritten whole through a rename."""
    path = Path(out_dir) / MANIFEST_NAME
    old = path.read_bytes() if path.exists() else b""
    atomic_write_bytes(path, old + manifest.to_json().encode() + b"\n")
    return path


def read_manifests(out_dir) -> list:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        return []
    return [json.loads(ln) for ln in path.read_text().splitlines() if ln.strip()]
