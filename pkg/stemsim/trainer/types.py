from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from stemsim.encoder.types import EncoderParams
from stemsim.errors import ErrorCode, StemSimError


def _invalid(field_name: str, message: str, value: Any) -> StemSimError:
    return StemSimError(ErrorCode.VALIDATION_ERROR, message, {"path": ["training", field_name], "value": value})


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.2
    batch_size: int = 64
    epochs: int = 150
    triplets_per_epoch: Optional[int] = None  # None -> number of training segments
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    n_trials: int = 5
    seed: int = 0
    grad_chunk: int = 48  # segments per forward/backward pass; memory knob, not a hyperparameter

    def __post_init__(self):
        if self.margin < 0:
            raise _invalid("margin", "margin must be >= 0", self.margin)
        if self.batch_size < 1:
            raise _invalid("batch_size", "batch_size must be >= 1", self.batch_size)
        if self.epochs < 1:
            raise _invalid("epochs", "epochs must be >= 1", self.epochs)
        if self.triplets_per_epoch is not None and self.triplets_per_epoch < 1:
            raise _invalid("triplets_per_epoch", "triplets_per_epoch must be >= 1", self.triplets_per_epoch)
        if not self.learning_rate > 0:
            raise _invalid("learning_rate", "learning_rate must be positive", self.learning_rate)
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise _invalid(name, f"{name} must lie in [0, 1)", getattr(self, name))
        if not self.adam_eps > 0:
            raise _invalid("adam_eps", "adam_eps must be positive", self.adam_eps)
        if self.n_trials < 1:
            raise _invalid("n_trials", "n_trials must be >= 1", self.n_trials)
        if self.grad_chunk < 1:
            raise _invalid("grad_chunk", "grad_chunk must be >= 1", self.grad_chunk)

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SegmentRef:
    track_id: str
    instrument: str
    segment_index: int
    row: int  # row in the training feature array


@dataclass(frozen=True)
class Triplet:
    anchor: SegmentRef
    positive: SegmentRef
    negative: SegmentRef

    def is_valid(self) -> bool:
        a, p, n = self.anchor, self.positive, self.negative
        return (
            a.track_id == p.track_id
            and a.segment_index != p.segment_index
            and n.track_id != a.track_id
            and a.instrument == p.instrument == n.instrument
        )


@dataclass
class TrainingIndex:
    """
    Training features grouped by track: rows of one track are contiguous and
    tracks appear in sorted id order.
    """
    instrument: str
    features: np.ndarray                     # (S, n_mels, n_frames), float32
    keys: List[Tuple[str, int]]              # (track_id, segment_index) per row
    track_ranges: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def track_ids(self) -> List[str]:
        return list(self.track_ranges)

    def ref(self, row: int) -> SegmentRef:
        track_id, segment_index = self.keys[row]
        return SegmentRef(track_id, self.instrument, segment_index, row)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, tensors: Dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t) for k, t in tensors.items()},
            v={k: np.zeros_like(t) for k, t in tensors.items()},
        )


@dataclass
class TrainedModel:
    role: str
    trial: int
    params: EncoderParams
    loss_history: List[float]
    config: Dict[str, Any]
    steps: int = 0

    @property
    def seed(self) -> int:
        training = self.config.get("training", {})
        return int(training.get("seed", self.config.get("seed", 0))) + self.trial
