from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from stemsim.errors import ErrorCode, StemSimError

from .types import FeatureConfig


def hann(n_fft: int) -> np.ndarray:
    # periodic Hann, the usual choice for spectral analysis
    return get_window("hann", n_fft, fftbins=True)


def stft_power(samples: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """
    Power spectrogram |DFT|^2 of Hann-windowed frames, shape (n_fft//2 + 1, n_frames).

    Frames start at 0, hop, 2*hop, ...; no padding, the trailing partial frame is dropped.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or len(x) < cfg.n_fft:
        raise StemSimError(
            ErrorCode.LENGTH_MISMATCH,
            "Input shorter than one analysis window",
            {"n_samples": int(x.shape[-1]) if x.ndim else 0, "n_fft": cfg.n_fft},
        )
    frames = sliding_window_view(x, cfg.n_fft)[:: cfg.hop]
    spectrum = np.fft.rfft(frames * hann(cfg.n_fft), axis=1)
    return (spectrum.real**2 + spectrum.imag**2).T
