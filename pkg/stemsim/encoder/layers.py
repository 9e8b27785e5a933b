"""
Layer primitives for the embedding network. Convolutions are valid-padding and strided, on (N, C, H, W) batches.

forward:   out[n, o, y, x] = b[o] + sum_{c,i,j} w[o, c, i, j] * in[n, c, y*sh + i, x*sw + j]
backward:  dw = sum_n,y,x dout * window,  db = sum dout,  dx scattered back per kernel tap
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Pair = Tuple[int, int]


def _windows(x: np.ndarray, kernel: Pair, stride: Pair) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw) view; Ho = floor((H - kh) / sh) + 1
    return sliding_window_view(x, kernel, axis=(2, 3))[:, :, :: stride[0], :: stride[1]]


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: Pair) -> np.ndarray:
    win = _windows(x, w.shape[2:], stride)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, Co)
    out = out.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out) + b[None, :, None, None]


def conv2d_backward(
    dout: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    stride: Pair,
    need_dx: bool = True,
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    kh, kw = w.shape[2:]
    sh, sw = stride
    win = _windows(x, (kh, kw), stride)
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (Co, C, kh, kw)
    db = dout.sum(axis=(0, 2, 3))
    if not need_dx:
        return dw, db, None

    n, _, ho, wo = dout.shape
    dx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            # (N, Ho, Wo, C) contribution of kernel tap (i, j)
            contrib = np.tensordot(dout, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            dx[:, :, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw] += contrib
    return dw, db, dx


def relu_forward(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = z > 0
    return z * mask, mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def global_avg_pool_forward(a: np.ndarray) -> np.ndarray:
    return a.mean(axis=(2, 3))


def global_avg_pool_backward(dout: np.ndarray, spatial: Pair) -> np.ndarray:
    h, w = spatial
    g = dout[:, :, None, None] / float(h * w)
    return np.broadcast_to(g, (*dout.shape, h, w))


def l2_normalize_forward(v: np.ndarray, guard: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise unit vectors; rows with norm < guard map to e1."""
    norms = np.linalg.norm(v, axis=1)
    e = np.zeros_like(v)
    ok = norms >= guard
    e[ok] = v[ok] / norms[ok, None]
    e[~ok, 0] = 1.0
    return e, norms


def l2_normalize_backward(de: np.ndarray, e: np.ndarray, norms: np.ndarray, guard: float = 1e-12) -> np.ndarray:
    """dv = (I - e e^T) de / ||v||; zero for guarded rows."""
    dv = np.zeros_like(de)
    ok = norms >= guard
    proj = de[ok] - e[ok] * np.sum(e[ok] * de[ok], axis=1, keepdims=True)
    dv[ok] = proj / norms[ok, None]
    return dv
