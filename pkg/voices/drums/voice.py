from __future__ import annotations

from typing import Any, Dict

import numpy as np
from scipy.signal import butter, sosfilt

from voices.common import add_event, normalize_peak, step_samples


class NoiseKit:
    """Three-piece kit: pitched kick sweep, band-passed noise snare, high-passed noise hat."""

    def draw_params(self, rng: np.random.Generator) -> Dict[str, Any]:
        kick = (rng.random(16) < 0.3).astype(int)
        kick[0] = 1
        snare = (rng.random(16) < 0.25).astype(int)
        hat = (rng.random(16) < 0.7).astype(int)
        hat[::4] = 1
        return {
            "tempo_bpm": float(rng.uniform(80, 160)),
            "kick": [int(v) for v in kick],
            "snare": [int(v) for v in snare],
            "hat": [int(v) for v in hat],
            "kick_hz": float(rng.uniform(40, 90)),
            "kick_decay": float(rng.uniform(0.05, 0.3)),
            "snare_hz": float(rng.uniform(800, 4000)),
            "snare_decay": float(rng.uniform(0.05, 0.25)),
            "hat_hz": float(rng.uniform(5000, 12000)),
            "hat_decay": float(rng.uniform(0.01, 0.08)),
            "peak": float(rng.uniform(0.25, 0.35)),
            "noise_seed": int(rng.integers(0, 2**31 - 1)),
        }

    def render(self, params: Dict[str, Any], n_samples: int, sample_rate: int) -> np.ndarray:
        noise_rng = np.random.default_rng(params["noise_seed"])
        step = step_samples(params["tempo_bpm"], sample_rate)

        kick = self._kick(params, sample_rate)
        snare = self._noise_burst(
            noise_rng,
            butter(2, [params["snare_hz"] / 1.5, min(params["snare_hz"] * 1.5, 0.45 * sample_rate)],
                   btype="bandpass", fs=sample_rate, output="sos"),
            params["snare_decay"],
            sample_rate,
        )
        hat = self._noise_burst(
            noise_rng,
            butter(2, min(params["hat_hz"], 0.45 * sample_rate), btype="highpass", fs=sample_rate, output="sos"),
            params["hat_decay"],
            sample_rate,
        )

        out = np.zeros(n_samples)
        n_steps = -(-n_samples // step)
        velocities = noise_rng.uniform(0.7, 1.0, size=(n_steps, 3))
        for i in range(n_steps):
            k = i % 16
            start = i * step
            if params["kick"][k]:
                add_event(out, start, velocities[i, 0] * kick)
            if params["snare"][k]:
                add_event(out, start, velocities[i, 1] * snare)
            if params["hat"][k]:
                add_event(out, start, 0.5 * velocities[i, 2] * hat)
        return normalize_peak(out, params["peak"])

    @staticmethod
    def _kick(params: Dict[str, Any], sample_rate: int) -> np.ndarray:
        n = int(4 * params["kick_decay"] * sample_rate)
        t = np.arange(n) / sample_rate
        f_end = params["kick_hz"]
        freq = f_end * (1.0 + 1.5 * np.exp(-t / 0.02))
        phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
        return np.sin(phase) * np.exp(-t / params["kick_decay"])

    @staticmethod
    def _noise_burst(rng: np.random.Generator, sos: np.ndarray, decay: float, sample_rate: int) -> np.ndarray:
        n = int(4 * decay * sample_rate)
        t = np.arange(n) / sample_rate
        burst = sosfilt(sos, rng.standard_normal(n))
        return normalize_peak(burst * np.exp(-t / decay), 1.0)
