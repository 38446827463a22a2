"""Writer for the EMB1 binary interchange format.

Layout: magic ``b"EMB1"`` | u32 LE dimension | repeated records of
[u16 LE id byte length | id UTF-8 | dim little-endian f32]. Records are
written in sorted-id order by a single writer, and a structured-text
manifest is placed next to the store at ``<path>.manifest.json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def write_store(path, vectors: dict[str, np.ndarray], dim: int,
                manifest: dict) -> None:
    """Write vectors (sorted by id) and the manifest sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", dim))
        for pub_id in sorted(vectors):
            vec = np.ascontiguousarray(vectors[pub_id], dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(
                    f"vector for {pub_id!r} has shape {vec.shape}, want ({dim},)"
                )
            encoded = pub_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ValueError(f"id too long: {pub_id!r}")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(vec.tobytes())
    manifest_path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
