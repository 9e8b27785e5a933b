from .audio import load_track, write_wav
from .manifest import load_manifest, manifest_from_layout, save_manifest
from .sdr import compute_sdr
from .segment import first_active_offset, rms, segment_track, window_offsets
from .synth import synth_corpus
from .types import (
    DEFAULT_SAMPLE_RATE,
    ORIGINAL_ROLES,
    ROLES,
    SEPARATED_ROLES,
    STEM_ROLES,
    CorpusManifest,
    CorpusSpec,
    Segment,
    SegmentationConfig,
    TrackAudio,
    TrackEntry,
    check_role,
    source_role,
)
