from __future__ import annotations

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

SDR_CAP_DB = 200.0
# residual/target energy ratio below which the SDR is reported as the cap
RESIDUAL_FLOOR = 1e-20


def compute_sdr(reference: np.ndarray, estimate: np.ndarray) -> float:
    """
    Scale-invariant SDR in dB.

    The estimate is projected onto the reference; the projection is the target
    and everything else is distortion.
    """
    s = np.asarray(reference, dtype=np.float64)
    s_hat = np.asarray(estimate, dtype=np.float64)
    if s.shape != s_hat.shape:
        raise StemSimError(
            ErrorCode.LENGTH_MISMATCH,
            "Reference and estimate lengths differ",
            {"reference": list(s.shape), "estimate": list(s_hat.shape)},
        )
    ref_energy = float(np.dot(s, s))
    if ref_energy == 0.0:
        raise StemSimError(ErrorCode.DEGENERATE_INPUT, "Reference signal is all zero")

    s_target = (np.dot(s_hat, s) / ref_energy) * s
    target_energy = float(np.dot(s_target, s_target))
    residual = s_hat - s_target
    residual_energy = float(np.dot(residual, residual))

    if target_energy == 0.0:
        # estimate orthogonal to (or absent from) the reference
        return -SDR_CAP_DB
    if residual_energy <= RESIDUAL_FLOOR * target_energy:
        return SDR_CAP_DB
    return float(min(SDR_CAP_DB, 10.0 * np.log10(target_energy / residual_energy)))
