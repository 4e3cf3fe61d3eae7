from __future__ import annotations

import hashlib
import json
import logging
import os
import sqlite3
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from triad.core import CheckpointCorruptionError, CheckpointVersionError, canonical_json

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

SCHEMA = """
CREATE TABLE IF NOT EXISTS checkpoint_meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS checkpoint_arrays (
    name TEXT PRIMARY KEY,
    dtype TEXT NOT NULL,
    shape TEXT NOT NULL,
    data BLOB NOT NULL
);

CREATE TABLE IF NOT EXISTS checkpoint_json (
    name TEXT PRIMARY KEY,
    payload TEXT NOT NULL
);
"""

ALLOWED_DTYPES = {"float64", "int64"}


@dataclass(slots=True)
class Checkpoint:
    """Everything needed to continue a run: parameters, masks, importance,
    anchors, SI paths, generated sets, optimizer moments and the cursor."""

    config_hash: str
    seed: int
    task: int
    epoch: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    state: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    format_version: int = CHECKPOINT_FORMAT_VERSION


def checkpoint_digest(arrays: Mapping[str, np.ndarray], documents: Mapping[str, str]) -> str:
    digest = hashlib.sha256()
    for name in sorted(arrays):
        values = np.ascontiguousarray(arrays[name])
        digest.update(name.encode("utf-8"))
        digest.update(str(values.dtype).encode("ascii"))
        digest.update(json.dumps(list(values.shape)).encode("ascii"))
        digest.update(values.tobytes())
    for name in sorted(documents):
        digest.update(name.encode("utf-8"))
        digest.update(documents[name].encode("utf-8"))
    return digest.hexdigest()


class CheckpointStore:
    def __init__(self, path: Path) -> None:
        self.path = Path(path)

    def connect(self, path: Path | None = None) -> sqlite3.Connection:
        return sqlite3.connect(path or self.path)

    def initialize_schema(self, conn: sqlite3.Connection) -> None:
        conn.executescript(SCHEMA)

    def save(self, checkpoint: Checkpoint) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        temp = self.path.with_name(f"{self.path.name}.tmp")
        if temp.exists():
            temp.unlink()
        arrays = {name: _storable(name, values) for name, values in checkpoint.arrays.items()}
        documents = {
            "state": canonical_json(checkpoint.state),
            "config": canonical_json(checkpoint.config),
        }
        meta = {
            "format_version": str(checkpoint.format_version),
            "config_hash": checkpoint.config_hash,
            "seed": str(checkpoint.seed),
            "task": str(checkpoint.task),
            "epoch": str(checkpoint.epoch),
            "digest": checkpoint_digest(arrays, documents),
        }
        conn = self.connect(temp)
        try:
            with conn:
                self.initialize_schema(conn)
                conn.executemany("INSERT INTO checkpoint_meta(key, value) VALUES (?, ?)", sorted(meta.items()))
                conn.executemany(
                    "INSERT INTO checkpoint_arrays(name, dtype, shape, data) VALUES (?, ?, ?, ?)",
                    [
                        (name, str(values.dtype), json.dumps(list(values.shape)), values.tobytes())
                        for name, values in sorted(arrays.items())
                    ],
                )
                conn.executemany(
                    "INSERT INTO checkpoint_json(name, payload) VALUES (?, ?)", sorted(documents.items())
                )
        finally:
            conn.close()
        os.replace(temp, self.path)
        logger.debug("checkpoint written to %s (%d arrays)", self.path, len(arrays))
        return self.path

    def load(self) -> Checkpoint:
        if not self.path.exists():
            raise FileNotFoundError(self.path)
        try:
            conn = self.connect()
            try:
                meta = dict(conn.execute("SELECT key, value FROM checkpoint_meta").fetchall())
                found = int(meta["format_version"])
                if found != CHECKPOINT_FORMAT_VERSION:
                    raise CheckpointVersionError(found, CHECKPOINT_FORMAT_VERSION)
                rows = conn.execute("SELECT name, dtype, shape, data FROM checkpoint_arrays").fetchall()
                documents = dict(conn.execute("SELECT name, payload FROM checkpoint_json").fetchall())
            finally:
                conn.close()
            arrays = {name: _restore(name, dtype, shape, data) for name, dtype, shape, data in rows}
            if checkpoint_digest(arrays, documents) != meta["digest"]:
                raise CheckpointCorruptionError(f"checkpoint {self.path} failed its digest check")
            return Checkpoint(
                config_hash=meta["config_hash"],
                seed=int(meta["seed"]),
                task=int(meta["task"]),
                epoch=int(meta["epoch"]),
                arrays=arrays,
                state=json.loads(documents["state"]),
                config=json.loads(documents["config"]),
                format_version=found,
            )
        except (sqlite3.Error, KeyError, ValueError) as exc:
            raise CheckpointCorruptionError(f"checkpoint {self.path} is unreadable: {exc}") from exc


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    return CheckpointStore(path).save(checkpoint)


def load_checkpoint(path: Path) -> Checkpoint:
    return CheckpointStore(path).load()


def _storable(name: str, values: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(values)
    if array.dtype.kind in "iub":
        array = array.astype(np.int64)
    elif array.dtype.kind == "f":
        array = array.astype(np.float64)
    if str(array.dtype) not in ALLOWED_DTYPES:
        raise ValueError(f"array '{name}' has unsupported dtype {array.dtype}")
    return array


def _restore(name: str, dtype: str, shape: str, data: bytes) -> np.ndarray:
    if dtype not in ALLOWED_DTYPES:
        raise CheckpointCorruptionError(f"array '{name}' has unknown dtype {dtype}")
    dims = tuple(int(d) for d in json.loads(shape))
    values = np.frombuffer(data, dtype=np.dtype(dtype))
    if values.size != int(np.prod(dims, dtype=np.int64)):
        raise CheckpointCorruptionError(f"array '{name}' holds {values.size} values for shape {dims}")
    return values.reshape(dims).copy()
