"""Bit-exact binary interchange format for document embeddings.

Layout: magic b"EMB1" | u32 LE dim | records of
[u16 LE id byte-length | id UTF-8 bytes | dim x f32 LE].
Vectors are stored as raw 32-bit model output; normalization happens at use.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimMismatch, DuplicateId, TruncatedFile, ZeroVector

MAGIC = b"EMB1"
DEFAULT_DIM = 768


@dataclass
class VectorStore:
    dim: int = DEFAULT_DIM
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def add(self, pub_id: str, values) -> None:
        if pub_id in self.vectors:
            raise DuplicateId(f"duplicate id {pub_id!r}")
        arr = np.asarray(values, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise DimMismatch(
                f"vector for {pub_id!r} has shape {arr.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in vector for {pub_id!r}")
        self.vectors[pub_id] = arr

    def get(self, pub_id: str) -> np.ndarray:
        return self.vectors[pub_id]

    def __contains__(self, pub_id: str) -> bool:
        return pub_id in self.vectors


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def write_store(store: VectorStore, path) -> None:
    """Write in sorted-id order so identical stores yield identical bytes."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", store.dim))
        for pub_id in sorted(store.vectors):
            id_bytes = pub_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise ValueError(f"id too long: {pub_id!r}")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(store.vectors[pub_id].astype("<f4").tobytes())
    if store.manifest:
        with open(manifest_path(path), "w", encoding="utf-8") as fh:
            json.dump(store.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_store(path) -> VectorStore:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise BadMagic(f"{path}: bad magic {magic!r}")
        header = fh.read(4)
        if len(header) < 4:
            raise TruncatedFile(f"{path}: truncated header")
        (dim,) = struct.unpack("<I", header)
        store = VectorStore(dim=dim)
        rec_bytes = 4 * dim
        while True:
            lb = fh.read(2)
            if not lb:
                break
            if len(lb) < 2:
                raise TruncatedFile(f"{path}: truncated id length")
            (id_len,) = struct.unpack("<H", lb)
            id_bytes = fh.read(id_len)
            if len(id_bytes) < id_len:
                raise TruncatedFile(f"{path}: truncated id")
            payload = fh.read(rec_bytes)
            if len(payload) < rec_bytes:
                raise TruncatedFile(f"{path}: truncated vector payload")
            pub_id = id_bytes.decode("utf-8")
            if pub_id in store.vectors:
                raise DuplicateId(f"{path}: duplicate id {pub_id!r}")
            store.vectors[pub_id] = np.frombuffer(payload, dtype="<f4").copy()
    mpath = manifest_path(path)
    if mpath.exists():
        with open(mpath, encoding="utf-8") as fh:
            store.manifest = json.load(fh)
    return store


def l2_normalize(v) -> np.ndarray:
    """Unit vector in float64; rejects zero and non-finite input."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ZeroVector("non-finite vector")
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return arr / norm
