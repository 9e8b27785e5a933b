from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

InstrumentRole = Literal[
    "mix",
    "drums",
    "bass",
    "piano",
    "guitar",
    "drums_separated",
    "bass_separated",
    "piano_separated",
]
Split = Literal["train", "test"]

ORIGINAL_ROLES: Tuple[str, ...] = ("mix", "drums", "bass", "piano", "guitar")
STEM_ROLES: Tuple[str, ...] = ("drums", "bass", "piano", "guitar")
SEPARATED_ROLES: Tuple[str, ...] = ("drums_separated", "bass_separated", "piano_separated")
ROLES: Tuple[str, ...] = ORIGINAL_ROLES + SEPARATED_ROLES
SPLITS: Tuple[str, ...] = ("train", "test")

DEFAULT_SAMPLE_RATE = 44100


def check_role(role: str) -> str:
    if role not in ROLES:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            f"Unknown instrument role '{role}'",
            {"role": role, "allowed": list(ROLES)},
        )
    return role


def source_role(role: str) -> str:
    """`bass_separated` -> `bass`; original roles map to themselves."""
    return role[: -len("_separated")] if role.endswith("_separated") else role


@dataclass(frozen=True)
class TrackAudio:
    track_id: str
    instrument: str
    sample_rate: int
    samples: np.ndarray = field(repr=False)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Segment:
    track_id: str
    instrument: str
    segment_index: int
    offset: int  # in samples, from the start of the track
    sample_rate: int
    samples: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SegmentationConfig:
    segment_seconds: float = 3.0
    overlap_fraction: float = 0.5
    max_segments_per_track: Optional[int] = 40
    silence_threshold: float = 1e-4

    def __post_init__(self):
        if not self.segment_seconds > 0:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                "segment_seconds must be positive",
                {"path": ["segmentation", "segment_seconds"], "value": self.segment_seconds},
            )
        if not 0 <= self.overlap_fraction < 1:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                "overlap_fraction must lie in [0, 1)",
                {"path": ["segmentation", "overlap_fraction"], "value": self.overlap_fraction},
            )
        if self.max_segments_per_track is not None and self.max_segments_per_track < 1:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                "max_segments_per_track must be >= 1 or unlimited",
                {"path": ["segmentation", "max_segments_per_track"], "value": self.max_segments_per_track},
            )
        if self.silence_threshold < 0:
            raise StemSimError(
                ErrorCode.VALIDATION_ERROR,
                "silence_threshold must be >= 0",
                {"path": ["segmentation", "silence_threshold"], "value": self.silence_threshold},
            )

    def segment_samples(self, sample_rate: int) -> int:
        return int(round(self.segment_seconds * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return max(1, int(round(self.segment_samples(sample_rate) * (1.0 - self.overlap_fraction))))


@dataclass(frozen=True)
class TrackEntry:
    track_id: str
    split: str
    stems: Dict[str, Path]  # role -> audio file


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    sample_rate: int
    tracks: List[TrackEntry]

    def split(self, split: str) -> List[TrackEntry]:
        return [t for t in self.tracks if t.split == split]

    def track(self, track_id: str) -> TrackEntry:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise StemSimError(ErrorCode.NOT_FOUND, f"Unknown track '{track_id}'", {"track_id": track_id})

    def roles(self) -> List[str]:
        present = {r for t in self.tracks for r in t.stems}
        return [r for r in ROLES if r in present]


@dataclass(frozen=True)
class CorpusSpec:
    """Counts for the synthetic corpus generator."""
    n_train_tracks: int
    n_test_tracks: int
    duration_s: float
    sample_rate: int = DEFAULT_SAMPLE_RATE
    separated: bool = False
