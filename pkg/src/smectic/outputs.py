"""Artifact writing with a content-hashed manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from .grid import ScalarField, VectorField3, save_field

MANIFEST = "manifest.json"


class OutputError(OSError):
    """Artifact IO failure; the message carries the offending path."""


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def dumps(obj: Any) -> str:
    """Pretty JSON with sorted keys (byte-stable for equal inputs)."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Record:
    """One artifact: ``kind`` is ``json``, ``csv`` or ``field``.

    ``payload`` is a JSON-able object, ``(header, rows)`` for CSV, or a
    field for dumps (written as ``<name>.bin`` plus ``<name>.json``).
    """

    name: str
    kind: str
    payload: Any


class OutputDir:
    """Writes artifacts into a directory and tracks them for the manifest."""

    def __init__(self, path: Union[str, Path], force: bool = False):
        self.path = Path(path)
        self.entries: List[dict] = []
        try:
            if self.path.exists():
                if not self.path.is_dir():
                    raise OutputError(f"{self.path}: exists and is not a directory")
                if any(self.path.iterdir()):
                    if not force:
                        raise OutputError(f"{self.path}: output directory is not empty (use --force to overwrite)")
                    shutil.rmtree(self.path)
            self.path.mkdir(parents=True, exist_ok=True)
        except OutputError:
            raise
        except OSError as exc:
            raise OutputError(f"{self.path}: {exc.strerror or exc}") from exc

    def _track(self, path: Path, kind: str) -> Path:
        self.entries.append(
            {"path": path.relative_to(self.path).as_posix(), "kind": kind, "bytes": path.stat().st_size, "sha256": sha256(path)}
        )
        return path

    def _guard(self, path: Path, fn):
        try:
            fn()
        except OSError as exc:
            raise OutputError(f"{path}: {exc.strerror or exc}") from exc

    def write_json(self, name: str, obj: Any) -> Path:
        path = self.path / name
        self._guard(path, lambda: path.write_text(dumps(obj)))
        return self._track(path, "json")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.path / name

        def write():
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(list(header))
                for row in rows:
                    w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])

        self._guard(path, write)
        return self._track(path, "csv")

    def write_field(self, name: str, field: Union[ScalarField, VectorField3]) -> Path:
        path = self.path / name
        out = []
        self._guard(path, lambda: out.extend(save_field(field, path, name)))
        for p in out:
            self._track(p, "field")
        return out[0]

    def write(self, rec: Record) -> Path:
        if rec.kind == "json":
            return self.write_json(rec.name, rec.payload)
        if rec.kind == "csv":
            header, rows = rec.payload
            return self.write_csv(rec.name, header, rows)
        if rec.kind == "field":
            return self.write_field(rec.name, rec.payload)
        raise ValueError(f"unknown record kind {rec.kind!r}")

    def manifest(self, meta: Optional[dict] = None, status: str = "ok", error: Optional[str] = None) -> Path:
        doc = {"status": status, "artifacts": self.entries}
        if meta:
            doc.update(meta)
        if error is not None:
            doc["error"] = error
        path = self.path / MANIFEST
        self._guard(path, lambda: path.write_text(dumps(doc)))
        return path


def emit_outputs(records: Sequence[Record], directory: Union[str, Path], force: bool = False, meta: Optional[dict] = None) -> dict:
    """Write ``records`` and a manifest; returns the manifest document."""
    out = OutputDir(directory, force)
    for rec in records:
        out.write(rec)
    path = out.manifest(meta)
    return json.loads(path.read_text())
