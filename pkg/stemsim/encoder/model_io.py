from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

from .types import EncoderArch, EncoderParams

MAGIC = b"STEMSIM\x01"
_LEN = struct.Struct("<I")


def model_bytes(params: EncoderParams, meta: Optional[Dict[str, Any]] = None) -> bytes:
    """
    MAGIC, uint32 header length, JSON header (arch, tensor names/shapes, meta),
    then little-endian float64 tensors in declaration order.
    """
    params.check()
    header = {
        "arch": params.arch.to_json(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in params.tensors.items()],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in params.tensors.values())
    return MAGIC + _LEN.pack(len(blob)) + blob + body


def save_model(path: Path, params: EncoderParams, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(model_bytes(params, meta))
    except OSError as e:
        raise StemSimError(ErrorCode.IO_ERROR, f"Cannot write model file: {path}", {"path": str(path)}) from e
    return path


def load_model(path: Path) -> Tuple[EncoderParams, Dict[str, Any]]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Model file not readable: {path}", {"path": str(path)}) from e

    if not data.startswith(MAGIC):
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "Not a model file", {"path": str(path)})
    (hlen,) = _LEN.unpack_from(data, len(MAGIC))
    start = len(MAGIC) + _LEN.size
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    arch = EncoderArch.from_json(header["arch"])

    offset = start + hlen
    tensors = {}
    for t in header["tensors"]:
        shape = tuple(t["shape"])
        n = int(np.prod(shape)) if shape else 1
        chunk = data[offset : offset + 8 * n]
        if len(chunk) != 8 * n:
            raise StemSimError(ErrorCode.VALIDATION_ERROR, "Model file truncated", {"path": str(path), "tensor": t["name"]})
        tensors[t["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        offset += 8 * n

    params = EncoderParams(arch=arch, tensors=tensors)
    params.check()
    return params, header.get("meta", {})
