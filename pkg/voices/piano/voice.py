from __future__ import annotations

from typing import Any, Dict

import numpy as np

from voices.common import MAJOR, MINOR, add_event, harmonic_tone, midi_to_hz, normalize_peak, scale_pitch, step_samples

N_HARMONICS = 10


class DecayingChords:
    def draw_params(self, rng: np.random.Generator) -> Dict[str, Any]:
        return {
            "tempo_bpm": float(rng.uniform(70, 140)),
            "root_midi": int(rng.integers(48, 61)),
            "minor": bool(rng.random() < 0.5),
            "progression": [int(d) for d in rng.integers(0, 7, size=4)],
            "chord_beats": int(rng.choice([1, 2, 4])),
            "rolloff": float(rng.uniform(0.8, 2.5)),
            "decay": float(rng.uniform(0.5, 4.0)),
            "peak": float(rng.uniform(0.25, 0.35)),
        }

    def render(self, params: Dict[str, Any], n_samples: int, sample_rate: int) -> np.ndarray:
        scale = MINOR if params["minor"] else MAJOR
        chord_len = params["chord_beats"] * step_samples(params["tempo_bpm"], sample_rate, steps_per_beat=1)
        h = np.arange(1, N_HARMONICS + 1, dtype=np.float64)
        amplitudes = h ** (-params["rolloff"])
        decays = params["decay"] * h**0.7

        chords = {}
        out = np.zeros(n_samples)
        n_chords = -(-n_samples // chord_len)
        for i in range(n_chords):
            degree = params["progression"][i % 4]
            if degree not in chords:
                notes = [scale_pitch(params["root_midi"], scale, degree + k) for k in (0, 2, 4)]
                chords[degree] = sum(
                    harmonic_tone(midi_to_hz(m), chord_len, sample_rate, amplitudes, decays) for m in notes
                )
            add_event(out, i * chord_len, chords[degree])
        return normalize_peak(out, params["peak"])
