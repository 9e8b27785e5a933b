from __future__ import annotations

from typing import Any, Dict

import numpy as np

from voices.common import MAJOR, MINOR, add_event, harmonic_tone, midi_to_hz, normalize_peak, scale_pitch, step_samples

N_HARMONICS = 12
CHORD_TONES = (0, 2, 4, 7, 9, 11)  # scale-degree offsets an arpeggio may pick from


class PluckedString:
    """Eighth-note arpeggios; two bars per chord."""

    def draw_params(self, rng: np.random.Generator) -> Dict[str, Any]:
        return {
            "tempo_bpm": float(rng.uniform(70, 150)),
            "root_midi": int(rng.integers(45, 58)),
            "minor": bool(rng.random() < 0.5),
            "progression": [int(d) for d in rng.integers(0, 7, size=4)],
            "arpeggio": [int(d) for d in rng.integers(0, len(CHORD_TONES), size=8)],
            "pluck_position": float(rng.uniform(0.1, 0.4)),
            "damping": float(rng.uniform(1.5, 6.0)),
            "inharmonicity": float(rng.uniform(0.0, 5e-4)),
            "peak": float(rng.uniform(0.25, 0.35)),
        }

    def render(self, params: Dict[str, Any], n_samples: int, sample_rate: int) -> np.ndarray:
        scale = MINOR if params["minor"] else MAJOR
        note_len = 2 * step_samples(params["tempo_bpm"], sample_rate, steps_per_beat=4)
        ring = 3 * note_len
        h = np.arange(1, N_HARMONICS + 1, dtype=np.float64)
        amplitudes = np.abs(np.sin(np.pi * h * params["pluck_position"])) / h**2
        decays = params["damping"] * (1.0 + 0.3 * h)

        plucks = {}
        out = np.zeros(n_samples)
        n_notes = -(-n_samples // note_len)
        for i in range(n_notes):
            chord = params["progression"][(i // 16) % 4]
            degree = chord + CHORD_TONES[params["arpeggio"][i % 8]]
            if degree not in plucks:
                f0 = midi_to_hz(scale_pitch(params["root_midi"], scale, degree))
                plucks[degree] = harmonic_tone(
                    f0, ring, sample_rate, amplitudes, decays, inharmonicity=params["inharmonicity"]
                )
            add_event(out, i * note_len, plucks[degree])
        return normalize_peak(out, params["peak"])
