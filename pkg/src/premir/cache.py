"""Preprocessed-dataset cache: folding and splitting run once per corpus."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .errors import ValidationError
from .folding import fold_all
from .network import PreparedSample

CACHE_FORMAT = "premir-cache"
CACHE_VERSION = 1


def prepare(data, vienna=None, min_loop: int = 3) -> list[PreparedSample]:
    """Fold (or ingest structures for) every sample and split/flip it."""
    structures = fold_all(data, vienna, min_loop)
    return [PreparedSample.build(s.id, s.sequence, structures[s.id], s.label) for s in data]


def save_cache(samples, path, config=None) -> None:
    doc = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "config": config or {},
        "samples": [asdict(s) for s in samples],
    }
    Path(path).write_text(json.dumps(doc, indent=None, sort_keys=True) + "\n")


def load_cache(path) -> list[PreparedSample]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a cache file ({exc})") from None
    if doc.get("format") != CACHE_FORMAT or doc.get("version") != CACHE_VERSION:
        raise ValidationError(
            f"{path}: cache format {doc.get('format')!r} v{doc.get('version')!r} "
            f"is not {CACHE_FORMAT} v{CACHE_VERSION}; rebuild it"
        )
    out = []
    for rec in doc["samples"]:
        s = PreparedSample(**rec)
        rebuilt = PreparedSample.build(s.id, s.sequence, s.structure, s.label)
        if rebuilt != s:
            raise ValidationError(f"{path}: cached split for {s.id!r} is inconsistent with its structure")
        out.append(s)
    return out
