from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from stemsim.errors import ErrorCode, StemSimError
from stemsim.trainer import cosine_distance

from .types import DistanceMatrix, EmbeddingIndex


def centroid(index: EmbeddingIndex, track_id: str) -> np.ndarray:
    """Plain mean of the track's embeddings (not renormalized)."""
    rows = [i for i, k in enumerate(index.keys) if k[0] == track_id]
    if not rows:
        raise StemSimError(ErrorCode.NOT_FOUND, f"Unknown track '{track_id}'", {"track_id": track_id})
    return np.asarray(index.embeddings, dtype=np.float64)[rows].mean(axis=0)


def centroids(index: EmbeddingIndex, track_ids: Optional[Sequence[str]] = None) -> List[np.ndarray]:
    return [centroid(index, t) for t in (track_ids or index.track_ids)]


def distance_matrix(
    centroid_vectors: Sequence[np.ndarray],
    track_ids: Optional[Sequence[str]] = None,
    role: str = "",
) -> DistanceMatrix:
    """Pairwise cosine distance between centroids; symmetric by construction, zero diagonal."""
    n = len(centroid_vectors)
    track_ids = list(track_ids) if track_ids is not None else [str(i) for i in range(n)]
    if len(track_ids) != n:
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Track id count does not match centroid count",
            {"track_ids": len(track_ids), "centroids": n},
        )
    zero = [track_ids[i] for i, c in enumerate(centroid_vectors) if np.linalg.norm(c) == 0.0]
    if zero:
        raise StemSimError(
            ErrorCode.DEGENERATE_INPUT,
            "Zero centroid: the track's embeddings cancel out",
            {"tracks": zero},
        )

    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = cosine_distance(centroid_vectors[i], centroid_vectors[j])
    return DistanceMatrix(track_ids=track_ids, values=values, role=role, trials=1)


def index_distance_matrix(index: EmbeddingIndex) -> DistanceMatrix:
    ids = index.track_ids
    return distance_matrix(centroids(index, ids), ids, role=index.instrument)


def average_matrices(matrices: Sequence[DistanceMatrix]) -> DistanceMatrix:
    """Elementwise mean over trials."""
    if not matrices:
        raise StemSimError(ErrorCode.EMPTY_RESULT, "No matrices to average")
    ids = matrices[0].track_ids
    for m in matrices[1:]:
        if m.track_ids != ids:
            raise StemSimError(
                ErrorCode.DIMENSION_MISMATCH,
                "Matrices cover different track lists",
                {"expected": ids, "got": m.track_ids},
            )
    values = np.mean([m.values for m in matrices], axis=0)
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(
        track_ids=list(ids),
        values=values,
        role=matrices[0].role,
        trials=sum(m.trials for m in matrices),
    )
