"""
Artifact files: atomic writes, provenance headers and config hashing.
"""

import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import pandas as pd

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]
HEADER_PREFIX = "# "


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write ``text`` to a temporary sibling file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    _LOGGER.debug("Wrote %s", path)
    return path


def write_json(
    path: PathLike,
    data: Mapping[str, Any],
    provenance: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write ``data`` as indented JSON, with ``provenance`` as its first key."""
    document: Dict[str, Any] = {}
    if provenance is not None:
        document["provenance"] = dict(provenance)
    document.update(data)
    return atomic_write_text(path, json.dumps(document, indent=2) + "\n")


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as stream:
        return json.load(stream)


def write_csv(
    path: PathLike, frame: pd.DataFrame, provenance: Optional[Mapping[str, Any]] = None
) -> Path:
    """Write ``frame`` as CSV preceded by ``# key=value`` provenance lines."""
    buffer = io.StringIO()
    for key, value in (provenance or {}).items():
        buffer.write(f"{HEADER_PREFIX}{key}={value}\n")
    frame.to_csv(buffer, index=False)
    return atomic_write_text(path, buffer.getvalue())


def read_csv(path: PathLike) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Read a CSV written by :func:`write_csv`; returns (provenance, frame)."""
    provenance = {}
    skip = 0
    with open(path, encoding="utf-8") as stream:
        for line in stream:
            if not line.startswith(HEADER_PREFIX):
                break
            key, _, value = line[len(HEADER_PREFIX) :].rstrip("\n").partition("=")
            provenance[key] = value
            skip += 1
    frame = pd.read_csv(path, skiprows=skip, float_precision="round_trip")
    return provenance, frame
