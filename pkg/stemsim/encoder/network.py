from __future__ import annotations

from typing import Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError
from stemsim.features.types import MelSpectrogram

from .layers import (
    conv2d_backward,
    conv2d_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    l2_normalize_backward,
    l2_normalize_forward,
    relu_backward,
    relu_forward,
)
from .types import EncoderArch, EncoderParams, ForwardCache, ParamGrads

NORM_GUARD = 1e-12


def init_params(arch: EncoderArch, seed: int) -> EncoderParams:
    """He-normal weights (std sqrt(2 / fan_in)), zero biases, drawn in declaration order."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in arch.tensor_shapes().items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return EncoderParams(arch=arch, tensors=tensors)


def _as_batch(arch: EncoderArch, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or tuple(x.shape[1:]) != tuple(arch.input_shape):
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Input shape does not match the encoder's expected input",
            {"got": list(x.shape), "expected": ["N", *arch.input_shape]},
        )
    return x[:, None, :, :]


def forward_batch(params: EncoderParams, x: np.ndarray, keep_cache: bool = True) -> Tuple[np.ndarray, ForwardCache]:
    """
    x: (N, n_mels, n_frames) -> embeddings (N, embedding_dim), each of unit norm.
    With keep_cache=False the returned cache carries no activations (inference only).
    """
    arch = params.arch
    a = _as_batch(arch, x)
    cache = ForwardCache(params=params)

    for i, block in enumerate(arch.conv_blocks):
        if keep_cache:
            cache.block_inputs.append(a)
        z = conv2d_forward(a, params.tensors[f"conv{i}.weight"], params.tensors[f"conv{i}.bias"], block.stride)
        a, mask = relu_forward(z)
        if keep_cache:
            cache.relu_masks.append(mask)

    h = global_avg_pool_forward(a)
    v = h @ params.tensors["fc.weight"].T + params.tensors["fc.bias"]
    e, norms = l2_normalize_forward(v, NORM_GUARD)

    if keep_cache:
        cache.pooled = h
        cache.embeddings = e
        cache.norms = norms
    return e, cache


def forward(params: EncoderParams, spec: MelSpectrogram) -> Tuple[np.ndarray, ForwardCache]:
    e, cache = forward_batch(params, spec.values[None])
    return e[0], cache


def embed(params: EncoderParams, x: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Inference over a large batch in fixed-size chunks."""
    x = np.asarray(x)
    if len(x) == 0:
        return np.zeros((0, params.arch.embedding_dim))
    parts = [forward_batch(params, x[s : s + chunk], keep_cache=False)[0] for s in range(0, len(x), chunk)]
    return np.concatenate(parts, axis=0)


def backward(cache: ForwardCache, grad_wrt_embedding: np.ndarray) -> ParamGrads:
    """
    Gradients of an upstream scalar loss with respect to every parameter tensor,
    summed over the batch held in `cache`.
    """
    if cache.embeddings is None or len(cache.block_inputs) != len(cache.params.arch.conv_blocks):
        raise StemSimError(
            ErrorCode.STALE_CACHE,
            "Forward cache holds no activations; run forward with keep_cache=True",
        )
    params = cache.params
    arch = params.arch
    g = np.asarray(grad_wrt_embedding, dtype=np.float64)
    if g.ndim == 1:
        g = g[None]
    if g.shape != cache.embeddings.shape:
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Upstream gradient does not match the cached batch",
            {"got": list(g.shape), "expected": list(cache.embeddings.shape)},
        )

    grads: ParamGrads = {}
    gv = l2_normalize_backward(g, cache.embeddings, cache.norms, NORM_GUARD)
    grads["fc.weight"] = gv.T @ cache.pooled
    grads["fc.bias"] = gv.sum(axis=0)
    gh = gv @ params.tensors["fc.weight"]

    spatial = arch.spatial_shapes()
    ga = global_avg_pool_backward(gh, spatial[-1])
    for i in reversed(range(len(arch.conv_blocks))):
        gz = relu_backward(ga, cache.relu_masks[i])
        dw, db, dx = conv2d_backward(
            gz,
            cache.block_inputs[i],
            params.tensors[f"conv{i}.weight"],
            arch.conv_blocks[i].stride,
            need_dx=i > 0,
        )
        grads[f"conv{i}.weight"] = dw
        grads[f"conv{i}.bias"] = db
        ga = dx

    return {name: grads[name] for name in arch.tensor_shapes()}
