from __future__ import annotations

from typing import List

import numpy as np

MAJOR = [0, 2, 4, 5, 7, 9, 11]
MINOR = [0, 2, 3, 5, 7, 8, 10]


def midi_to_hz(midi: float) -> float:
    return 440.0 * 2.0 ** ((midi - 69.0) / 12.0)


def scale_pitch(root_midi: int, scale: List[int], degree: int) -> int:
    octave, step = divmod(degree, len(scale))
    return root_midi + 12 * octave + scale[step]


def step_samples(tempo_bpm: float, sample_rate: int, steps_per_beat: int = 4) -> int:
    return max(1, int(round(60.0 / tempo_bpm / steps_per_beat * sample_rate)))


def add_event(out: np.ndarray, start: int, event: np.ndarray) -> None:
    """Overlap-add `event` into `out` at `start`, truncated at the end of `out`."""
    if start >= len(out):
        return
    stop = min(len(out), start + len(event))
    out[start:stop] += event[: stop - start]


def harmonic_tone(
    f0: float,
    n_samples: int,
    sample_rate: int,
    amplitudes: np.ndarray,
    decays: np.ndarray,
    inharmonicity: float = 0.0,
) -> np.ndarray:
    """Sum of exponentially decaying partials; partials above Nyquist are dropped."""
    t = np.arange(n_samples) / sample_rate
    h = np.arange(1, len(amplitudes) + 1, dtype=np.float64)
    freqs = f0 * h * np.sqrt(1.0 + inharmonicity * h**2)
    keep = freqs < 0.45 * sample_rate
    phases = 2.0 * np.pi * np.outer(freqs[keep], t)
    env = np.exp(-np.outer(decays[keep], t))
    return (amplitudes[keep, None] * env * np.sin(phases)).sum(axis=0)


def normalize_peak(x: np.ndarray, peak: float) -> np.ndarray:
    m = float(np.max(np.abs(x))) if len(x) else 0.0
    return x * (peak / m) if m > 0 else x
