"""Canonical JSON encoding and atomic file writes.

Every artifact this package writes goes through here so that identical
content always produces identical bytes (sorted keys, fixed separators, a
trailing newline, no wall-clock anything).
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, dumps_canonical(obj))
