from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

Key = Tuple[str, int]  # (track_id, segment_index)


def _invalid(field_name: str, message: str, value: Any) -> StemSimError:
    return StemSimError(ErrorCode.VALIDATION_ERROR, message, {"path": ["evaluation", field_name], "value": value})


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    top_n: int = 5
    n_sets: int = 8
    snippet_seconds: float = 10.0
    snippet_offset: float = 0.0  # search for the first non-silent snippet from here (seconds)
    max_retries: int = 1000

    def __post_init__(self):
        if self.k < 1:
            raise _invalid("k", "k must be >= 1", self.k)
        if self.top_n < 0:
            raise _invalid("top_n", "top_n must be >= 0", self.top_n)
        if self.n_sets < 0:
            raise _invalid("n_sets", "n_sets must be >= 0", self.n_sets)
        if not self.snippet_seconds > 0:
            raise _invalid("snippet_seconds", "snippet_seconds must be positive", self.snippet_seconds)
        if self.snippet_offset < 0:
            raise _invalid("snippet_offset", "snippet_offset must be >= 0", self.snippet_offset)
        if self.max_retries < 1:
            raise _invalid("max_retries", "max_retries must be >= 1", self.max_retries)

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EmbeddingIndex:
    instrument: str
    trial: int
    keys: List[Key]
    embeddings: np.ndarray  # (N, D)

    def __post_init__(self):
        if len(self.keys) != len(self.embeddings):
            raise StemSimError(
                ErrorCode.DIMENSION_MISMATCH,
                "Embedding count does not match key count",
                {"keys": len(self.keys), "embeddings": len(self.embeddings)},
            )
        if len(set(self.keys)) != len(self.keys):
            raise StemSimError(ErrorCode.VALIDATION_ERROR, "Duplicate (track_id, segment_index) in index")
        self._rows = {k: i for i, k in enumerate(self.keys)}

    def __len__(self) -> int:
        return len(self.keys)

    def row(self, key: Key) -> int:
        key = (key[0], int(key[1]))
        if key not in self._rows:
            raise StemSimError(ErrorCode.NOT_FOUND, f"Key {key} not in index", {"track_id": key[0], "segment_index": key[1]})
        return self._rows[key]

    @property
    def track_ids(self) -> List[str]:
        return sorted({k[0] for k in self.keys})


@dataclass
class DistanceMatrix:
    track_ids: List[str]
    values: np.ndarray  # (n, n)
    role: str = ""
    trials: int = 1

    @property
    def n(self) -> int:
        return len(self.track_ids)

    def position(self, track_id: str) -> int:
        try:
            return self.track_ids.index(track_id)
        except ValueError:
            raise StemSimError(ErrorCode.NOT_FOUND, f"Unknown track '{track_id}'", {"track_id": track_id}) from None


@dataclass
class AudioSet:
    anchor: str
    positive: str
    negative: str
    role: str                      # role whose audio is presented
    contrast_role: str             # metric the negative was drawn from
    snippet_offsets: Dict[str, float] = field(default_factory=dict)  # track_id -> seconds

    def to_json(self) -> Dict[str, Any]:
        return {
            "anchor": self.anchor,
            "positive": self.positive,
            "negative": self.negative,
            "role": self.role,
            "contrast_role": self.contrast_role,
            "snippet_offsets": dict(self.snippet_offsets),
        }
