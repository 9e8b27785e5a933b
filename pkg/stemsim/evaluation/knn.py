from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

from .types import EmbeddingIndex, Key


class _Neighbors:
    """Per-index arrays shared by every query."""

    def __init__(self, index: EmbeddingIndex):
        e = np.asarray(index.embeddings, dtype=np.float64)
        norms = np.linalg.norm(e, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise StemSimError(ErrorCode.DEGENERATE_INPUT, "Index contains a zero embedding")
        self.unit = e / norms
        self.track_of = [k[0] for k in index.keys]
        tracks = sorted(set(self.track_of))
        rank = {t: i for i, t in enumerate(tracks)}
        self.track_rank = np.array([rank[t] for t in self.track_of], dtype=np.int64)
        self.seg = np.array([k[1] for k in index.keys], dtype=np.int64)

    def distances(self, row: int) -> np.ndarray:
        return 1.0 - self.unit @ self.unit[row]

    def nearest(self, row: int, k: int) -> List[Tuple[int, float]]:
        """k nearest rows other than `row`, ordered by (distance, track_id, segment_index)."""
        d = self.distances(row)
        d[row] = np.inf
        order = np.lexsort((self.seg, self.track_rank, d))
        return [(int(i), float(d[i])) for i in order[:k]]


def _vote(neighbors: List[Tuple[int, float]], track_of: List[str]) -> str:
    counts: Dict[str, int] = {}
    sums: Dict[str, float] = {}
    for i, dist in neighbors:
        t = track_of[i]
        counts[t] = counts.get(t, 0) + 1
        sums[t] = sums.get(t, 0.0) + dist
    # most votes, then smallest summed distance, then lexicographic id
    return min(counts, key=lambda t: (-counts[t], sums[t], t))


def _check(index: EmbeddingIndex, k: int) -> None:
    if k < 1:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "k must be >= 1", {"k": k})
    if len(index) <= k:
        raise StemSimError(
            ErrorCode.PRECONDITION_FAILED,
            "Index must hold more than k entries",
            {"entries": len(index), "k": k},
        )


def knn_predict(index: EmbeddingIndex, query: Key, k: int = 5) -> str:
    """Leave-one-out majority vote over the k nearest other entries by cosine distance."""
    _check(index, k)
    row = index.row(query)
    nb = _Neighbors(index)
    return _vote(nb.nearest(row, k), nb.track_of)


def knn_predictions(index: EmbeddingIndex, k: int = 5) -> List[str]:
    _check(index, k)
    nb = _Neighbors(index)
    return [_vote(nb.nearest(row, k), nb.track_of) for row in range(len(index))]


def knn_accuracy(index: EmbeddingIndex, k: int = 5) -> float:
    predictions = knn_predictions(index, k)
    hits = sum(p == key[0] for p, key in zip(predictions, index.keys))
    return hits / len(index)
