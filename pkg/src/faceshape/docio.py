"""Small helpers for the JSON documents used by every file format.

All on-disk artifacts are JSON with a ``format_version`` field. Floats are
written with Python's shortest round-trip repr, which reparses bit-exactly
for binary64, so save/load round-trips are lossless.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import SchemaError

FORMAT_VERSION = 1


def write_document(doc: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_document(path):
    """Load a JSON document (or document array); malformed input raises SchemaError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a valid document: {exc}") from exc


def expect_fields(doc: dict, fields, path="<doc>") -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected an object, got {type(doc).__name__}")
    missing = [f for f in fields if f not in doc]
    if missing:
        raise SchemaError(f"{path}: missing fields {missing}")


def expect_version(doc: dict, path="<doc>") -> None:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(
            f"{path}: unsupported format_version {version!r} (expected {FORMAT_VERSION})"
        )
