from __future__ import annotations

from typing import Any, Dict

import numpy as np

from voices.common import MAJOR, MINOR, add_event, harmonic_tone, midi_to_hz, normalize_peak, scale_pitch, step_samples

N_HARMONICS = 8


class HarmonicLine:
    def draw_params(self, rng: np.random.Generator) -> Dict[str, Any]:
        return {
            "tempo_bpm": float(rng.uniform(80, 160)),
            "root_midi": int(rng.integers(28, 41)),
            "minor": bool(rng.random() < 0.5),
            "degrees": [int(d) for d in rng.integers(0, 8, size=8)],
            "note_steps": int(rng.choice([2, 4])),
            "rolloff": float(rng.uniform(0.5, 2.5)),
            "decay": float(rng.uniform(1.0, 8.0)),
            "peak": float(rng.uniform(0.25, 0.35)),
        }

    def render(self, params: Dict[str, Any], n_samples: int, sample_rate: int) -> np.ndarray:
        scale = MINOR if params["minor"] else MAJOR
        note_len = params["note_steps"] * step_samples(params["tempo_bpm"], sample_rate, steps_per_beat=4)
        h = np.arange(1, N_HARMONICS + 1, dtype=np.float64)
        amplitudes = h ** (-params["rolloff"])
        decays = params["decay"] * np.sqrt(h)

        # short linear attack removes clicks at note boundaries
        attack = min(note_len, int(0.005 * sample_rate))
        ramp = np.ones(note_len)
        ramp[:attack] = np.linspace(0.0, 1.0, attack, endpoint=False)
        ramp[-attack:] = np.minimum(ramp[-attack:], np.linspace(1.0, 0.0, attack))

        tones = {}
        out = np.zeros(n_samples)
        n_notes = -(-n_samples // note_len)
        for i in range(n_notes):
            degree = params["degrees"][i % 8]
            if degree not in tones:
                f0 = midi_to_hz(scale_pitch(params["root_midi"], scale, degree))
                tones[degree] = harmonic_tone(f0, note_len, sample_rate, amplitudes, decays) * ramp
            add_event(out, i * note_len, tones[degree])
        return normalize_peak(out, params["peak"])
