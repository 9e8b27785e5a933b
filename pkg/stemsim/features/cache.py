from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

_HEADER = struct.Struct("<II")


def config_hash(payload: Dict[str, Any]) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_matrix(path: Path, values: np.ndarray) -> None:
    """dimensions (two little-endian uint32) then row-major little-endian float32 entries"""
    rows, cols = values.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as f:
        f.write(_HEADER.pack(rows, cols))
        f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
    tmp.replace(path)


def read_matrix(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise StemSimError(
            ErrorCode.STALE_CACHE,
            "Truncated feature cache file; delete it or the cache directory",
            {"path": str(path)},
        )
    rows, cols = _HEADER.unpack_from(data)
    body = data[_HEADER.size :]
    if len(body) != rows * cols * 4:
        raise StemSimError(
            ErrorCode.STALE_CACHE,
            "Feature cache file size does not match its header; delete it or the cache directory",
            {"path": str(path), "rows": rows, "cols": cols, "bytes": len(body)},
        )
    return np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float32)


class FeatureCache:
    """
    One file per segment under root/<config hash>/<instrument>/<track_id>/<segment_index>.f32
    """

    def __init__(self, root: Path, key: str):
        self.root = Path(root)
        self.key = key

    def path(self, track_id: str, instrument: str, segment_index: int) -> Path:
        return self.root / self.key[:16] / instrument / track_id / f"{segment_index:05d}.f32"

    def get(self, track_id: str, instrument: str, segment_index: int) -> Optional[np.ndarray]:
        p = self.path(track_id, instrument, segment_index)
        return read_matrix(p) if p.exists() else None

    def put(self, track_id: str, instrument: str, segment_index: int, values: np.ndarray) -> None:
        try:
            write_matrix(self.path(track_id, instrument, segment_index), values)
        except OSError as e:
            raise StemSimError(ErrorCode.IO_ERROR, "Cannot write feature cache", {"root": str(self.root), "error": str(e)}) from e
