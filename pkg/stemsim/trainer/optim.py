from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from stemsim.encoder.types import EncoderParams, ParamGrads
from stemsim.errors import ErrorCode, StemSimError

from .types import AdamState, TrainConfig


def adam_update(
    tensors: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    hyper: TrainConfig,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam step. Inputs are left untouched; new arrays are returned."""
    if set(grads) != set(tensors):
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Gradient names do not match parameter names",
            {"params": sorted(tensors), "grads": sorted(grads)},
        )
    for name, t in tensors.items():
        g = grads[name]
        if g.shape != t.shape:
            raise StemSimError(
                ErrorCode.DIMENSION_MISMATCH,
                f"Gradient for '{name}' has shape {g.shape}, expected {t.shape}",
                {"tensor": name},
            )
        if not np.all(np.isfinite(g)):
            raise StemSimError(ErrorCode.NON_FINITE, f"Gradient for '{name}' has non-finite entries", {"tensor": name})

    b1, b2 = hyper.adam_beta1, hyper.adam_beta2
    step = state.step + 1
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step

    new_t, new_m, new_v = {}, {}, {}
    for name, t in tensors.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        new_t[name] = t - hyper.learning_rate * (m / c1) / (np.sqrt(v / c2) + hyper.adam_eps)
        new_m[name] = m
        new_v[name] = v
    return new_t, AdamState(m=new_m, v=new_v, step=step)


def optimizer_step(
    params: EncoderParams, grads: ParamGrads, state: AdamState, hyper: TrainConfig
) -> Tuple[EncoderParams, AdamState]:
    tensors, state = adam_update(params.tensors, grads, state, hyper)
    return EncoderParams(arch=params.arch, tensors=tensors), state
