from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
import soundfile as sf

from stemsim.errors import ErrorCode, StemSimError

from .types import DEFAULT_SAMPLE_RATE, TrackAudio

READABLE_SUBTYPES = ("PCM_16", "FLOAT")


def load_track(
    path: Path,
    expected_sr: int = DEFAULT_SAMPLE_RATE,
    track_id: Optional[str] = None,
    instrument: Optional[str] = None,
) -> TrackAudio:
    """
    Read a WAV file into a mono TrackAudio.

    Stereo is downmixed by channel mean; samples are clamped to [-1, 1].
    track_id / instrument default to the parent directory name and file stem.
    """
    path = Path(path)
    try:
        info = sf.info(str(path))
        data, sr = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, OSError) as e:  # soundfile.LibsndfileError is a RuntimeError
        raise StemSimError(
            ErrorCode.CORRUPT_AUDIO,
            f"Unreadable audio file: {path}",
            {"path": str(path), "error": str(e)},
        ) from e

    if info.format != "WAV" or info.subtype not in READABLE_SUBTYPES:
        raise StemSimError(
            ErrorCode.CORRUPT_AUDIO,
            "Unsupported audio encoding (expected PCM or IEEE-float WAV)",
            {"path": str(path), "format": info.format, "subtype": info.subtype},
        )
    if sr != expected_sr:
        raise StemSimError(
            ErrorCode.SAMPLE_RATE_MISMATCH,
            f"Sample rate {sr} Hz does not match expected {expected_sr} Hz",
            {"path": str(path), "sample_rate": sr, "expected": expected_sr},
        )
    if data.shape[0] == 0:
        raise StemSimError(ErrorCode.CORRUPT_AUDIO, "Audio file has no samples", {"path": str(path)})

    samples = data.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise StemSimError(ErrorCode.CORRUPT_AUDIO, "Audio contains non-finite samples", {"path": str(path)})
    np.clip(samples, -1.0, 1.0, out=samples)

    return TrackAudio(
        track_id=track_id if track_id is not None else path.parent.name,
        instrument=instrument if instrument is not None else path.stem,
        sample_rate=int(sr),
        samples=samples,
    )


def write_wav(path: Path, samples: np.ndarray, sample_rate: int) -> None:
    """Mono 16-bit PCM."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), np.clip(samples, -1.0, 1.0), sample_rate, subtype="PCM_16", format="WAV")
    except (RuntimeError, OSError) as e:
        raise StemSimError(
            ErrorCode.IO_ERROR,
            f"Cannot write audio file: {path}",
            {"path": str(path), "error": str(e)},
        ) from e
