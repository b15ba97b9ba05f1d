"""Shared plumbing: output provenance headers and config hashing."""

from __future__ import annotations

import hashlib
import json
import os
from typing import IO, Iterable


def toolkit_version() -> str:
    from . import __version__

    return __version__


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serialisable config dict."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def meta_dict(seed=None, config: dict | None = None, **extra) -> dict:
    meta = {"toolkit": "hawkeslob", "version": toolkit_version()}
    if seed is not None:
        meta["seed"] = int(seed)
    if config is not None:
        meta["config_hash"] = config_hash(config)
    meta.update(extra)
    return meta


def write_meta_header(fh: IO[str], meta: dict) -> None:
    """Write provenance as leading '#' comment lines; readers skip them."""
    for key, value in meta.items():
        fh.write(f"# {key}={value}\n")


def read_lines_skipping_meta(fh: IO[str]) -> tuple[dict, list[str]]:
    meta, numbered = read_numbered_lines(fh)
    return meta, [line for _, line in numbered]


def read_numbered_lines(fh: IO[str]) -> tuple[dict, list[tuple[int, str]]]:
    """Data rows with their physical 1-based line numbers, meta lines parsed out."""
    meta: dict = {}
    rows: list[tuple[int, str]] = []
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if line:
            rows.append((lineno, line))
    return meta, rows


def thread_cap() -> int:
    """Parallelism cap from HAWKESLOB_THREADS (default 1 = sequential)."""
    raw = os.environ.get("HAWKESLOB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
