from __future__ import annotations

from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from stemsim.corpus import CorpusManifest, SegmentationConfig, load_track, segment_track
from stemsim.corpus.types import Segment
from stemsim.observability import get_logger

from .cache import FeatureCache, config_hash
from .mel import log_mel
from .types import FeatureConfig, MelSpectrogram

log = get_logger(__name__)


def feature_key(seg_cfg: SegmentationConfig, feat_cfg: FeatureConfig, sample_rate: int) -> str:
    return config_hash(
        {
            "segmentation": {
                "segment_seconds": seg_cfg.segment_seconds,
                "overlap_fraction": seg_cfg.overlap_fraction,
                "silence_threshold": seg_cfg.silence_threshold,
            },
            "features": feat_cfg.to_json(),
            "sample_rate": sample_rate,
        }
    )


def open_cache(
    cache_dir: Optional[Path], seg_cfg: SegmentationConfig, feat_cfg: FeatureConfig, sample_rate: int
) -> Optional[FeatureCache]:
    if cache_dir is None:
        return None
    return FeatureCache(cache_dir, feature_key(seg_cfg, feat_cfg, sample_rate))


def featurize_segments(
    segments: List[Segment], feat_cfg: FeatureConfig, cache: Optional[FeatureCache] = None
) -> List[MelSpectrogram]:
    """
    Log-mel features for a list of segments, stored as float32 whether or not
    they come from the cache.
    """
    out = []
    for seg in segments:
        values = cache.get(seg.track_id, seg.instrument, seg.segment_index) if cache else None
        if values is None:
            values = log_mel(seg, feat_cfg).values.astype(np.float32)
            if cache:
                cache.put(seg.track_id, seg.instrument, seg.segment_index, values)
        out.append(MelSpectrogram(seg.track_id, seg.instrument, seg.segment_index, values))
    return out


def iter_role_segments(
    manifest: CorpusManifest, split: str, role: str, seg_cfg: SegmentationConfig
) -> Iterator[Tuple[str, List[Segment]]]:
    """(track_id, segments) per track, sorted by id; tracks without the role are skipped."""
    for entry in sorted(manifest.split(split), key=lambda t: t.track_id):
        path = entry.stems.get(role)
        if path is None:
            log.warning("track has no stem for role", extra={"role": role, "fields": {"track_id": entry.track_id}})
            continue
        audio = load_track(path, manifest.sample_rate, track_id=entry.track_id, instrument=role)
        yield entry.track_id, segment_track(audio, seg_cfg)


def load_role_features(
    manifest: CorpusManifest,
    split: str,
    role: str,
    seg_cfg: SegmentationConfig,
    feat_cfg: FeatureConfig,
    cache_dir: Optional[Path] = None,
) -> List[MelSpectrogram]:
    cache = open_cache(cache_dir, seg_cfg, feat_cfg, manifest.sample_rate)
    feats: List[MelSpectrogram] = []
    for track_id, segments in iter_role_segments(manifest, split, role, seg_cfg):
        feats.extend(featurize_segments(segments, feat_cfg, cache))
    log.info(
        "features ready",
        extra={"role": role, "fields": {"split": split, "segments": len(feats), "cached": cache is not None}},
    )
    return feats


def stack_features(feats: List[MelSpectrogram]) -> Tuple[np.ndarray, List[Tuple[str, int]]]:
    """(N, n_mels, n_frames) float64 array plus the (track_id, segment_index) keys in order."""
    if not feats:
        return np.zeros((0, 0, 0)), []
    x = np.stack([f.values for f in feats]).astype(np.float64)
    return x, [(f.track_id, f.segment_index) for f in feats]
