from __future__ import annotations

from typing import List

import numpy as np

from stemsim.errors import ErrorCode, StemSimError
from stemsim.features.types import MelSpectrogram

from .types import TrainingIndex, Triplet


def build_index(instrument: str, feats: List[MelSpectrogram]) -> TrainingIndex:
    """Group features by track (sorted by id, then segment index) into one contiguous array."""
    ordered = sorted(feats, key=lambda f: (f.track_id, f.segment_index))
    ranges = {}
    for row, f in enumerate(ordered):
        start, _ = ranges.get(f.track_id, (row, row))
        ranges[f.track_id] = (start, row + 1)
    features = np.stack([f.values for f in ordered]).astype(np.float32) if ordered else np.zeros((0, 0, 0), np.float32)
    return TrainingIndex(
        instrument=instrument,
        features=features,
        keys=[(f.track_id, f.segment_index) for f in ordered],
        track_ranges=ranges,
    )


def check_sampling_preconditions(index: TrainingIndex) -> None:
    if len(index.track_ranges) < 2:
        raise StemSimError(
            ErrorCode.PRECONDITION_FAILED,
            "Triplet sampling needs at least two tracks",
            {"instrument": index.instrument, "tracks": len(index.track_ranges)},
        )
    short = [t for t, (s, e) in index.track_ranges.items() if e - s < 2]
    if short:
        raise StemSimError(
            ErrorCode.PRECONDITION_FAILED,
            "Every track needs at least two segments",
            {"instrument": index.instrument, "tracks": short[:10]},
        )


def sample_triplet_batch(index: TrainingIndex, batch_size: int, rng: np.random.Generator) -> List[Triplet]:
    """
    anchor: uniform over all segments
    positive: uniform over the anchor's track, anchor excluded
    negative: uniform over all segments of the other tracks
    """
    check_sampling_preconditions(index)
    total = len(index)
    row_track = index.keys
    out: List[Triplet] = []
    for _ in range(batch_size):
        a = int(rng.integers(total))
        start, end = index.track_ranges[row_track[a][0]]
        size = end - start

        p = start + int(rng.integers(size - 1))
        if p >= a:
            p += 1

        r = int(rng.integers(total - size))
        n = r if r < start else r + size

        out.append(Triplet(index.ref(a), index.ref(p), index.ref(n)))
    return out
