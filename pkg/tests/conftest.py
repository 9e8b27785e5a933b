from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from stemsim.corpus import CorpusSpec, SegmentationConfig, synth_corpus
from stemsim.encoder import ConvBlock, EncoderArch
from stemsim.features import FeatureConfig

SMALL_SR = 8000


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_arch() -> EncoderArch:
    """Two blocks, 8-d embedding; small enough for finite-difference checks."""
    return EncoderArch(
        conv_blocks=(ConvBlock(3), ConvBlock(4)),
        embedding_dim=8,
        input_shape=(12, 14),
    )


@pytest.fixture
def small_features() -> FeatureConfig:
    # 1 s segments at 8 kHz -> 16 x 61 log-mel matrices
    return FeatureConfig(n_fft=256, hop=128, n_mels=16)


@pytest.fixture
def small_segmentation() -> SegmentationConfig:
    return SegmentationConfig(segment_seconds=1.0, overlap_fraction=0.5, max_segments_per_track=6)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> Path:
    """4 train + 10 test tracks of 6 s at 8 kHz, with simulated separated stems."""
    out = tmp_path_factory.mktemp("corpus")
    synth_corpus(
        CorpusSpec(n_train_tracks=4, n_test_tracks=10, duration_s=6.0, sample_rate=SMALL_SR, separated=True),
        seed=7,
        out_dir=out,
    )
    return out


@pytest.fixture
def audit_db(tmp_path, monkeypatch):
    from storage.db.engine import reset_engine

    monkeypatch.setenv("DATABASE_URL", f"sqlite:///{tmp_path / 'audit.db'}")
    reset_engine()
    yield
    reset_engine()
