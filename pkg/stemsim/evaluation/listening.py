from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from stemsim.corpus import CorpusManifest, first_active_offset, load_track, write_wav
from stemsim.errors import ErrorCode, StemSimError
from stemsim.observability import get_logger

from .types import AudioSet, DistanceMatrix

log = get_logger("evaluation.listening")

ContrastSource = Union[DistanceMatrix, Sequence[Tuple[str, DistanceMatrix]]]
CANDIDATES = 2
SET_POSITIONS = ("anchor", "positive", "negative")


def query_similar(matrix: DistanceMatrix, track_id: str, top_n: int) -> List[Tuple[str, float]]:
    """Other tracks by ascending distance to `track_id`; equal distances fall back to id order."""
    i = matrix.position(track_id)
    if top_n < 0:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "top_n must be >= 0", {"top_n": top_n})
    others = [(float(matrix.values[i, j]), t) for j, t in enumerate(matrix.track_ids) if j != i]
    others.sort()
    return [(t, d) for d, t in others[:top_n]]


def _contrast_list(contrast: ContrastSource) -> List[Tuple[str, DistanceMatrix]]:
    if isinstance(contrast, DistanceMatrix):
        return [(contrast.role, contrast)]
    out = list(contrast)
    if not out:
        raise StemSimError(ErrorCode.NOT_FOUND, "No contrast distance matrix available")
    return out


def build_listening_sets(
    focused: DistanceMatrix,
    contrast: ContrastSource,
    rng: np.random.Generator,
    n_sets: int,
    role: str | None = None,
    max_retries: int = 1000,
) -> List[AudioSet]:
    """
    Draw (anchor, positive, negative) sets for a perceptual comparison.

    The positive comes from the anchor's two nearest tracks under `focused`, the negative
    from its two nearest under the contrast metric. A draw whose two candidate pools share a
    track is discarded. With several contrast matrices one is picked uniformly per draw.
    """
    contrasts = _contrast_list(contrast)
    ids = focused.track_ids
    for name, m in contrasts:
        if m.track_ids != ids:
            raise StemSimError(
                ErrorCode.DIMENSION_MISMATCH,
                "Focused and contrast matrices cover different track lists",
                {"focused": focused.role, "contrast": name},
            )
    if len(ids) < 4:
        raise StemSimError(
            ErrorCode.PRECONDITION_FAILED,
            "Listening sets need at least 4 tracks",
            {"n_tracks": len(ids)},
        )
    if n_sets < 0:
        raise StemSimError(ErrorCode.VALIDATION_ERROR, "n_sets must be >= 0", {"n_sets": n_sets})

    role = role or focused.role
    sets: List[AudioSet] = []
    for _ in range(n_sets):
        for attempt in range(max_retries):
            anchor = ids[int(rng.integers(len(ids)))]
            contrast_role, contrast_matrix = contrasts[int(rng.integers(len(contrasts)))]
            pos_pool = [t for t, _ in query_similar(focused, anchor, CANDIDATES)]
            neg_pool = [t for t, _ in query_similar(contrast_matrix, anchor, CANDIDATES)]
            if set(pos_pool) & set(neg_pool):
                continue
            sets.append(
                AudioSet(
                    anchor=anchor,
                    positive=pos_pool[int(rng.integers(CANDIDATES))],
                    negative=neg_pool[int(rng.integers(CANDIDATES))],
                    role=role,
                    contrast_role=contrast_role,
                )
            )
            break
        else:
            raise StemSimError(
                ErrorCode.CONSTRUCTION_FAILURE,
                "Candidate pools overlapped on every draw",
                {"role": role, "max_retries": max_retries, "built": len(sets)},
            )
    log.info("listening sets built", extra={"role": role, "fields": {"n_sets": len(sets)}})
    return sets


def snippet_path(out_dir: Path, set_no: int, position: str, track_id: str) -> Path:
    return Path(out_dir) / f"set_{set_no:02d}_{position}_{track_id}.wav"


def export_snippets(
    sets: Sequence[AudioSet],
    manifest: CorpusManifest,
    out_dir: Path,
    split: str = "test",
    snippet_seconds: float = 10.0,
    snippet_offset: float = 0.0,
    silence_threshold: float = 1e-4,
) -> List[AudioSet]:
    """Write three snippets per set and return the sets with their offsets filled in."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tracks = {t.track_id: t for t in manifest.split(split)}
    cache: Dict[Tuple[str, str], Tuple[int, np.ndarray]] = {}

    def snippet(track_id: str, role: str) -> Tuple[int, np.ndarray]:
        if (track_id, role) in cache:
            return cache[(track_id, role)]
        entry = tracks.get(track_id)
        if entry is None or role not in entry.stems:
            raise StemSimError(
                ErrorCode.NOT_FOUND,
                f"No '{role}' audio for track '{track_id}' in split '{split}'",
                {"track_id": track_id, "role": role, "split": split},
            )
        audio = load_track(entry.stems[role], manifest.sample_rate, track_id, role)
        # shorter tracks give a shorter snippet
        seconds = min(snippet_seconds, audio.duration - snippet_offset)
        if seconds <= 0:
            raise StemSimError(
                ErrorCode.LENGTH_MISMATCH,
                "Snippet offset lies beyond the end of the track",
                {"track_id": track_id, "offset": snippet_offset, "duration": audio.duration},
            )
        start = first_active_offset(audio, seconds, silence_threshold, start_seconds=snippet_offset)
        n = int(round(seconds * audio.sample_rate))
        cache[(track_id, role)] = (start, audio.samples[start : start + n])
        return cache[(track_id, role)]

    filled = []
    for i, s in enumerate(sets):
        offsets: Dict[str, float] = {}
        for position in SET_POSITIONS:
            track_id = getattr(s, position)
            start, samples = snippet(track_id, s.role)
            write_wav(snippet_path(out_dir, i, position, track_id), samples, manifest.sample_rate)
            offsets[track_id] = start / manifest.sample_rate
        filled.append(
            AudioSet(s.anchor, s.positive, s.negative, s.role, s.contrast_role, offsets)
        )
    return filled
