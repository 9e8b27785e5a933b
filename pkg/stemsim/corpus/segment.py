from __future__ import annotations

from typing import List

import numpy as np

from stemsim.errors import ErrorCode, StemSimError

from .types import Segment, SegmentationConfig, TrackAudio


def rms(samples: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(samples, dtype=np.float64))))


def window_offsets(n_samples: int, seg_len: int, hop: int) -> np.ndarray:
    """Start offsets of every full window; trailing partial windows are dropped."""
    if n_samples < seg_len:
        return np.zeros(0, dtype=np.int64)
    return np.arange(0, n_samples - seg_len + 1, hop, dtype=np.int64)


def segment_track(audio: TrackAudio, cfg: SegmentationConfig) -> List[Segment]:
    """
    Split a track into fixed-length overlapping segments.

    Silent windows (RMS below cfg.silence_threshold) are skipped and do not count
    toward cfg.max_segments_per_track. segment_index is the ordinal among the
    emitted segments.
    """
    seg_len = cfg.segment_samples(audio.sample_rate)
    hop = cfg.hop_samples(audio.sample_rate)
    cap = cfg.max_segments_per_track

    segments: List[Segment] = []
    for offset in window_offsets(len(audio.samples), seg_len, hop):
        if cap is not None and len(segments) >= cap:
            break
        window = audio.samples[offset : offset + seg_len]
        if rms(window) < cfg.silence_threshold:
            continue
        segments.append(
            Segment(
                track_id=audio.track_id,
                instrument=audio.instrument,
                segment_index=len(segments),
                offset=int(offset),
                sample_rate=audio.sample_rate,
                samples=window,
            )
        )

    if not segments:
        raise StemSimError(
            ErrorCode.EMPTY_RESULT,
            "Track yields no non-silent full-length segment",
            {
                "track_id": audio.track_id,
                "instrument": audio.instrument,
                "n_samples": len(audio.samples),
                "segment_samples": seg_len,
            },
        )
    return segments


def first_active_offset(
    audio: TrackAudio,
    seconds: float,
    silence_threshold: float,
    start_seconds: float = 0.0,
    step_seconds: float = 1.0,
) -> int:
    """Offset (samples) of the first window of `seconds` length at or after start that is not silent."""
    sr = audio.sample_rate
    start = int(round(start_seconds * sr))
    win = int(round(seconds * sr))
    step = max(1, int(round(step_seconds * sr)))
    for offset in window_offsets(len(audio.samples) - start, win, step):
        s = start + int(offset)
        if rms(audio.samples[s : s + win]) >= silence_threshold:
            return s
    raise StemSimError(
        ErrorCode.EMPTY_RESULT,
        f"No non-silent {seconds:g} s window in track",
        {"track_id": audio.track_id, "instrument": audio.instrument, "start_seconds": start_seconds},
    )
