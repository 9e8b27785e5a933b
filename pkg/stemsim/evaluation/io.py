from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import List, Sequence

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

from .types import AudioSet, DistanceMatrix, EmbeddingIndex

EMBEDDING_MAGIC = b"STEMEMB1"
_LEN = struct.Struct("<I")


def _io_error(path: Path, action: str, e: OSError) -> StemSimError:
    return StemSimError(ErrorCode.IO_ERROR, f"Cannot {action} {path}", {"path": str(path), "error": str(e)})


def _open_for_write(path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open("w", newline="", encoding="utf-8")


# --- embeddings ---------------------------------------------------------------


def write_embeddings_csv(path: Path, index: EmbeddingIndex) -> Path:
    dim = index.embeddings.shape[1] if index.embeddings.ndim == 2 else 0
    try:
        with _open_for_write(path) as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["track_id", "segment_index"] + [f"e{i}" for i in range(dim)])
            for (track_id, seg), row in zip(index.keys, index.embeddings):
                w.writerow([track_id, seg] + [repr(float(v)) for v in row])
    except OSError as e:
        raise _io_error(path, "write", e) from e
    return Path(path)


def read_embeddings_csv(path: Path, instrument: str = "", trial: int = 0) -> EmbeddingIndex:
    try:
        with Path(path).open("r", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Embedding file not readable: {path}", {"path": str(path)}) from e
    if not rows or rows[0][:2] != ["track_id", "segment_index"]:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Missing embedding CSV header", {"path": str(path)})
    dim = len(rows[0]) - 2
    body = rows[1:]
    keys = [(r[0], int(r[1])) for r in body]
    values = np.array([[float(v) for v in r[2:]] for r in body], dtype=np.float64).reshape(len(body), dim)
    return EmbeddingIndex(instrument, trial, keys, values)


def write_embeddings_bin(path: Path, index: EmbeddingIndex) -> Path:
    """MAGIC, uint32 header length, JSON header (role, trial, keys, dim), then <f8 rows."""
    e = np.asarray(index.embeddings, dtype="<f8")
    header = {
        "instrument": index.instrument,
        "trial": index.trial,
        "dim": int(e.shape[1]) if e.ndim == 2 else 0,
        "keys": [[t, int(s)] for t, s in index.keys],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(EMBEDDING_MAGIC + _LEN.pack(len(blob)) + blob + np.ascontiguousarray(e).tobytes())
    except OSError as e_:
        raise _io_error(path, "write", e_) from e_
    return path


def read_embeddings_bin(path: Path) -> EmbeddingIndex:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Embedding file not readable: {path}", {"path": str(path)}) from e
    if not data.startswith(EMBEDDING_MAGIC):
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Not an embedding store", {"path": str(path)})
    (hlen,) = _LEN.unpack_from(data, len(EMBEDDING_MAGIC))
    start = len(EMBEDDING_MAGIC) + _LEN.size
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    keys = [(t, int(s)) for t, s in header["keys"]]
    body = data[start + hlen :]
    expected = len(keys) * header["dim"] * 8
    if len(body) != expected:
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Embedding store is truncated",
            {"path": str(path), "expected_bytes": expected, "got_bytes": len(body)},
        )
    values = np.frombuffer(body, dtype="<f8").reshape(len(keys), header["dim"]).astype(np.float64)
    return EmbeddingIndex(header["instrument"], int(header["trial"]), keys, values)


# --- distance matrices --------------------------------------------------------


def write_matrix_csv(path: Path, matrix: DistanceMatrix) -> Path:
    try:
        with _open_for_write(path) as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow([""] + list(matrix.track_ids))
            for t, row in zip(matrix.track_ids, matrix.values):
                w.writerow([t] + [repr(float(v)) for v in row])
    except OSError as e:
        raise _io_error(path, "write", e) from e
    return Path(path)


def read_matrix_csv(path: Path, role: str = "") -> DistanceMatrix:
    try:
        with Path(path).open("r", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Distance matrix not readable: {path}", {"path": str(path)}) from e
    if not rows:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Empty distance matrix file", {"path": str(path)})
    ids = rows[0][1:]
    body = rows[1:]
    if [r[0] for r in body] != ids or any(len(r) != len(ids) + 1 for r in body):
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "Distance matrix rows and columns disagree",
            {"path": str(path)},
        )
    values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64).reshape(len(ids), len(ids))
    return DistanceMatrix(track_ids=ids, values=values, role=role)


def write_pgm(path: Path, matrix: DistanceMatrix, cell: int = 8) -> Path:
    """Binary P5 heatmap; 0 (black) is the closest pair, 255 the largest distance."""
    values = np.asarray(matrix.values, dtype=np.float64)
    peak = float(values.max()) if values.size else 0.0
    scaled = values / peak if peak > 0 else np.zeros_like(values)
    pixels = np.round(np.clip(scaled, 0.0, 1.0) * 255.0).astype(np.uint8)
    pixels = np.kron(pixels, np.ones((cell, cell), dtype=np.uint8))
    h, w = pixels.shape
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
    except OSError as e:
        raise _io_error(path, "write", e) from e
    return path


# --- listening sets -----------------------------------------------------------


def write_listening_sets(path: Path, sets: Sequence[AudioSet]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([s.to_json() for s in sets], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise _io_error(path, "write", e) from e
    return path


def read_listening_sets(path: Path) -> List[AudioSet]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Listening sets not readable: {path}", {"path": str(path)}) from e
    return [
        AudioSet(
            anchor=s["anchor"],
            positive=s["positive"],
            negative=s["negative"],
            role=s["role"],
            contrast_role=s.get("contrast_role", ""),
            snippet_offsets={k: float(v) for k, v in s.get("snippet_offsets", {}).items()},
        )
        for s in payload
    ]


def write_correlation_csv(path: Path, table: dict) -> Path:
    """Role-by-role table as produced by correlation_table."""
    try:
        with _open_for_write(path) as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow([table["method"]] + list(table["roles"]))
            for role, row in zip(table["roles"], table["values"]):
                w.writerow([role] + [repr(float(v)) for v in row])
    except OSError as e:
        raise _io_error(path, "write", e) from e
    return Path(path)
