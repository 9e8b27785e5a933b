from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from stemsim.errors import ErrorCode, StemSimError


def _invalid(field_name: str, message: str, value: Any) -> StemSimError:
    return StemSimError(ErrorCode.VALIDATION_ERROR, message, {"path": ["features", field_name], "value": value})


@dataclass(frozen=True)
class FeatureConfig:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 20.0
    fmax: Optional[float] = None  # None -> sample_rate / 2
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_fft < 2:
            raise _invalid("n_fft", "n_fft must be >= 2", self.n_fft)
        if not 0 < self.hop <= self.n_fft:
            raise _invalid("hop", "hop must satisfy 0 < hop <= n_fft", self.hop)
        if self.n_mels < 1:
            raise _invalid("n_mels", "n_mels must be >= 1", self.n_mels)
        if self.fmin < 0:
            raise _invalid("fmin", "fmin must be >= 0", self.fmin)
        if self.fmax is not None and not self.fmin < self.fmax:
            raise _invalid("fmax", "fmax must exceed fmin", self.fmax)
        if not self.log_floor > 0:
            raise _invalid("log_floor", "log_floor must be positive", self.log_floor)

    def resolved_fmax(self, sample_rate: int) -> float:
        fmax = sample_rate / 2.0 if self.fmax is None else float(self.fmax)
        if fmax > sample_rate / 2.0:
            raise _invalid("fmax", "fmax must not exceed the Nyquist frequency", fmax)
        return fmax

    def n_frames(self, n_samples: int) -> int:
        return 1 + (n_samples - self.n_fft) // self.hop

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MelSpectrogram:
    track_id: str
    instrument: str
    segment_index: int
    values: np.ndarray = field(repr=False)  # (n_mels, n_frames), log(power + eps)

    @property
    def shape(self):
        return self.values.shape
