from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Protocol

import numpy as np


class Voice(Protocol):
    """Procedural instrument. draw_params must consume `rng` deterministically."""

    def draw_params(self, rng: np.random.Generator) -> Dict[str, Any]: ...

    def render(self, params: Dict[str, Any], n_samples: int, sample_rate: int) -> np.ndarray: ...


@dataclass(frozen=True)
class VoiceSpec:
    """Static voice metadata discovered from a manifest."""
    name: str                    # e.g. "drums.noise_kit"
    role: str                    # instrument role the voice renders
    handler: str                 # e.g. "voices.drums.voice:NoiseKit"
    params_schema_path: Path     # absolute path to JSON schema
    description: str = ""


@dataclass
class RegisteredVoice:
    """Resolved, callable voice."""
    spec: VoiceSpec
    voice: Voice
