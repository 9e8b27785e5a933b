from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from stemsim.errors import ErrorCode, StemSimError
from stemsim.observability import get_logger
from stemsim.registry import VoiceRegistry

from .audio import write_wav
from .manifest import save_manifest
from .types import STEM_ROLES, CorpusManifest, CorpusSpec, TrackEntry

log = get_logger(__name__)

# Roles for which a simulated separated stem is written when spec.separated is set.
SEPARATION_SOURCES = ("drums", "bass", "piano")
LEAK_RANGE = (0.1, 0.4)


def _track_ids(spec: CorpusSpec) -> List[tuple]:
    total = spec.n_train_tracks + spec.n_test_tracks
    width = max(2, len(str(total - 1)))
    return [
        (f"T{i:0{width}d}", "train" if i < spec.n_train_tracks else "test")
        for i in range(total)
    ]


def _rng(seed: int, track_no: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, track_no, stream]))


def synth_corpus(
    spec: CorpusSpec,
    seed: int,
    out_dir: Path,
    registry: Optional[VoiceRegistry] = None,
    segment_seconds: float = 3.0,
) -> CorpusManifest:
    """
    Render a deterministic multi-stem corpus to out_dir/<split>/<track_id>/<role>.wav
    and write out_dir/manifest.json.

    Each (track, instrument) pair draws its voice parameters from its own seeded
    stream, so similarity structure is independent across instruments.
    """
    if spec.n_train_tracks < 1 or spec.n_test_tracks < 1:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "Corpus needs at least one train and one test track",
            {"n_train_tracks": spec.n_train_tracks, "n_test_tracks": spec.n_test_tracks},
        )
    if spec.duration_s < 2 * segment_seconds:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            "Track duration must cover at least two segments",
            {"duration_s": spec.duration_s, "minimum": 2 * segment_seconds},
        )

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StemSimError(ErrorCode.IO_ERROR, f"Cannot create output directory: {out_dir}", {"path": str(out_dir)}) from e

    registry = registry or VoiceRegistry().discover()
    sr = spec.sample_rate
    n_samples = int(round(spec.duration_s * sr))

    tracks: List[TrackEntry] = []
    for track_no, (track_id, split) in enumerate(_track_ids(spec)):
        stems: Dict[str, np.ndarray] = {}
        for role_no, role in enumerate(STEM_ROLES):
            rv = registry.get(role)
            params = rv.voice.draw_params(_rng(seed, track_no, role_no))
            registry.validate_params(role, params)
            stems[role] = np.clip(rv.voice.render(params, n_samples, sr), -1.0, 1.0)

        mix = np.clip(sum(stems[r] for r in STEM_ROLES), -1.0, 1.0)
        audio = dict(stems, mix=mix)

        if spec.separated:
            leak_rng = _rng(seed, track_no, len(STEM_ROLES))
            for role in SEPARATION_SOURCES:
                leak = float(leak_rng.uniform(*LEAK_RANGE))
                audio[f"{role}_separated"] = np.clip(stems[role] + leak * (mix - stems[role]), -1.0, 1.0)

        track_dir = out_dir / split / track_id
        paths = {}
        for role, samples in audio.items():
            p = track_dir / f"{role}.wav"
            write_wav(p, samples, sr)
            paths[role] = p.resolve()
        tracks.append(TrackEntry(track_id=track_id, split=split, stems=paths))
        log.info("track rendered", extra={"fields": {"track_id": track_id, "split": split, "files": len(paths)}})

    manifest = CorpusManifest(root=out_dir.resolve(), sample_rate=sr, tracks=tracks)
    save_manifest(manifest, out_dir)
    return manifest
