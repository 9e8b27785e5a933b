from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np
from scipy.stats import rankdata

from stemsim.errors import ErrorCode, StemSimError

from .types import DistanceMatrix


def _check_pair(m_a: DistanceMatrix, m_b: DistanceMatrix) -> int:
    a, b = np.asarray(m_a.values), np.asarray(m_b.values)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Matrices must be square and of equal shape",
            {"a": list(a.shape), "b": list(b.shape)},
        )
    if m_a.track_ids != m_b.track_ids:
        raise StemSimError(ErrorCode.DIMENSION_MISMATCH, "Matrices cover different track lists")
    n = a.shape[0]
    if n < 3:
        raise StemSimError(ErrorCode.PRECONDITION_FAILED, "Correlation needs at least 3 tracks", {"n": n})
    return n


def _pearson(x: np.ndarray, y: np.ndarray, what: str) -> float:
    x = x - x.mean()
    y = y - y.mean()
    sx = float(np.sqrt(np.dot(x, x)))
    sy = float(np.sqrt(np.dot(y, y)))
    if sx == 0.0 or sy == 0.0:
        raise StemSimError(ErrorCode.DEGENERATE_INPUT, f"Zero variance in {what}")
    return float(np.clip(np.dot(x, y) / (sx * sy), -1.0, 1.0))


def upper_triangle(m: DistanceMatrix) -> np.ndarray:
    values = np.asarray(m.values, dtype=np.float64)
    return values[np.triu_indices(values.shape[0], k=1)]


def pearson_upper(m_a: DistanceMatrix, m_b: DistanceMatrix) -> float:
    """Pearson r over the strict upper triangles of two distance matrices."""
    _check_pair(m_a, m_b)
    return _pearson(upper_triangle(m_a), upper_triangle(m_b), "upper triangle")


def off_diagonal_column(values: np.ndarray, j: int) -> np.ndarray:
    return np.delete(values[:, j], j)


def spearman_avg(m_a: DistanceMatrix, m_b: DistanceMatrix) -> float:
    """
    Mean over columns of the Spearman coefficient between the two matrices.

    Each column's diagonal entry is dropped before ranking; ties get average ranks.
    """
    n = _check_pair(m_a, m_b)
    a = np.asarray(m_a.values, dtype=np.float64)
    b = np.asarray(m_b.values, dtype=np.float64)
    rhos = []
    for j in range(n):
        ra = rankdata(off_diagonal_column(a, j), method="average")
        rb = rankdata(off_diagonal_column(b, j), method="average")
        rhos.append(_pearson(ra, rb, f"column {j} ({m_a.track_ids[j]})"))
    return float(np.mean(rhos))


def correlation_table(matrices: Sequence[DistanceMatrix], method: str = "spearman") -> Dict[str, object]:
    """Symmetric role-by-role table with unit diagonal."""
    fn = {"spearman": spearman_avg, "pearson": pearson_upper}.get(method)
    if fn is None:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            f"Unknown correlation method '{method}'",
            {"method": method, "allowed": ["pearson", "spearman"]},
        )
    roles = [m.role for m in matrices]
    k = len(matrices)
    table = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            table[i, j] = table[j, i] = fn(matrices[i], matrices[j])
    rows: List[List[float]] = [[float(v) for v in row] for row in table]
    return {"method": method, "roles": roles, "values": rows}
