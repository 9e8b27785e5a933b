from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from stemsim.corpus import DEFAULT_SAMPLE_RATE, ORIGINAL_ROLES, SegmentationConfig
from stemsim.encoder import ConvBlock, EncoderArch
from stemsim.encoder.types import DEFAULT_BLOCKS
from stemsim.evaluation import EvalConfig
from stemsim.features import FeatureConfig
from stemsim.trainer import TrainConfig

RUN_NAMESPACE = uuid.UUID("6f1c2b9e-3f4a-5d7b-9e0c-1a2b3c4d5e6f")


@dataclass(frozen=True)
class SegmentationSettings:
    segment_seconds: float = 3.0
    overlap_fraction: float = 0.5
    silence_threshold: float = 1e-4
    train_max_segments: Optional[int] = 40
    test_max_segments: Optional[int] = None

    def for_split(self, split: str) -> SegmentationConfig:
        return SegmentationConfig(
            segment_seconds=self.segment_seconds,
            overlap_fraction=self.overlap_fraction,
            max_segments_per_track=self.train_max_segments if split == "train" else self.test_max_segments,
            silence_threshold=self.silence_threshold,
        )


@dataclass(frozen=True)
class RunConfig:
    manifest: Optional[Path] = None
    output_dir: Path = Path("runs")
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    roles: Tuple[str, ...] = ORIGINAL_ROLES
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    cache_dir: Optional[Path] = None
    conv_blocks: Tuple[ConvBlock, ...] = DEFAULT_BLOCKS
    embedding_dim: int = 128
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        # surfaces a collapsed conv stack at load time rather than at training time
        self.encoder_arch()

    def input_shape(self) -> Tuple[int, int]:
        seg_len = self.segmentation.for_split("train").segment_samples(self.sample_rate)
        return (self.features.n_mels, self.features.n_frames(seg_len))

    def encoder_arch(self) -> EncoderArch:
        return EncoderArch(
            conv_blocks=self.conv_blocks,
            embedding_dim=self.embedding_dim,
            input_shape=self.input_shape(),
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "manifest": None if self.manifest is None else str(self.manifest),
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "roles": list(self.roles),
            "segmentation": asdict(self.segmentation),
            "features": {**self.features.to_json(), "cache_dir": None if self.cache_dir is None else str(self.cache_dir)},
            "encoder": {
                "embedding_dim": self.embedding_dim,
                "conv_blocks": [
                    {"out_channels": b.out_channels, "kernel": list(b.kernel), "stride": list(b.stride)}
                    for b in self.conv_blocks
                ],
            },
            "training": {k: v for k, v in self.training.to_json().items() if k != "seed"},
            "evaluation": self.evaluation.to_json(),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_id(self) -> str:
        return str(uuid.uuid5(RUN_NAMESPACE, self.config_hash()))
