from __future__ import annotations

from typing import Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - <a, b> / (|a| |b|), in [0, 2]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise StemSimError(ErrorCode.DEGENERATE_INPUT, "Cosine distance of a zero-norm vector")
    return float(np.clip(1.0 - np.dot(a, b) / (na * nb), 0.0, 2.0))


def cosine_distance_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine distance of two (N, D) arrays, unclipped."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise StemSimError(ErrorCode.DEGENERATE_INPUT, "Cosine distance of a zero-norm vector")
    return 1.0 - np.sum(a * b, axis=1) / (na * nb)


def cosine_distance_grad(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise (dd/da, dd/db) for d = 1 - <a, b> / (|a| |b|)."""
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    cos = np.sum(a * b, axis=1, keepdims=True) / (na * nb)
    da = -(b / (na * nb) - cos * a / na**2)
    db = -(a / (na * nb) - cos * b / nb**2)
    return da, db


def triplet_loss(d_ap: float, d_an: float, margin: float) -> float:
    """max(d_ap - d_an + margin, 0)"""
    return max(d_ap - d_an + margin, 0.0)


def triplet_loss_grad(d_ap: float, d_an: float, margin: float) -> Tuple[float, float]:
    """(dL/dd_ap, dL/dd_an); the subgradient at the hinge boundary is 0."""
    if d_ap - d_an + margin > 0.0:
        return 1.0, -1.0
    return 0.0, 0.0


def batch_triplet_objective(
    e_a: np.ndarray, e_p: np.ndarray, e_n: np.ndarray, margin: float
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    Mean triplet loss over a batch under cosine distance, and its gradient with
    respect to each of the three embedding arrays. The anchor collects the
    contributions of both distance terms.
    """
    d_ap = cosine_distance_rows(e_a, e_p)
    d_an = cosine_distance_rows(e_a, e_n)
    hinge = d_ap - d_an + margin
    active = (hinge > 0.0).astype(np.float64)[:, None]
    n = len(e_a)
    loss = float(np.sum(np.maximum(hinge, 0.0)) / n)

    dap_da, dap_dp = cosine_distance_grad(e_a, e_p)
    dan_da, dan_dn = cosine_distance_grad(e_a, e_n)
    g_a = active * (dap_da - dan_da) / n
    g_p = active * dap_dp / n
    g_n = -active * dan_dn / n
    return loss, g_a, g_p, g_n
