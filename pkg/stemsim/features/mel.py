from __future__ import annotations

from functools import lru_cache
from typing import Union

import numpy as np

from stemsim.corpus.types import Segment
from stemsim.errors import ErrorCode, StemSimError

from .stft import stft_power
from .types import FeatureConfig, MelSpectrogram


def hz_to_mel(freq: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mels: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return 700.0 * (np.power(10.0, np.asarray(mels, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(cfg: FeatureConfig, sample_rate: int) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.resolved_fmax(sample_rate)), cfg.n_mels + 2))
    return edges[1:-1]


@lru_cache(maxsize=16)
def mel_filterbank(cfg: FeatureConfig, sample_rate: int) -> np.ndarray:
    """
    Triangular filters, shape (n_mels, n_fft//2 + 1), peaks equally spaced on the
    HTK mel scale between fmin and fmax, peak value 1 (no area normalization).

    The returned array is shared and read-only.
    """
    fmax = cfg.resolved_fmax(sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.n_mels + 2))
    fft_freqs = np.arange(cfg.n_fft // 2 + 1) * sample_rate / cfg.n_fft

    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (fft_freqs[None, :] - lower) / (center - lower)
    down = (upper - fft_freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(up, down))

    empty = np.flatnonzero(fb.max(axis=1) <= 0.0)
    if empty.size:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "n_mels too large for the frequency resolution: some filters cover no FFT bin",
            {"path": ["features", "n_mels"], "n_mels": cfg.n_mels, "empty_filters": empty[:10].tolist()},
        )
    fb.setflags(write=False)
    return fb


def log_mel_values(samples: np.ndarray, cfg: FeatureConfig, sample_rate: int) -> np.ndarray:
    fb = mel_filterbank(cfg, sample_rate)
    return np.log(fb @ stft_power(samples, cfg) + cfg.log_floor)


def log_mel(segment: Segment, cfg: FeatureConfig) -> MelSpectrogram:
    return MelSpectrogram(
        track_id=segment.track_id,
        instrument=segment.instrument,
        segment_index=segment.segment_index,
        values=log_mel_values(segment.samples, cfg, segment.sample_rate),
    )
