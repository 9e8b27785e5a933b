from __future__ import annotations

from typing import List

import numpy as np

from stemsim.encoder import embed
from stemsim.errors import ErrorCode, StemSimError
from stemsim.features import MelSpectrogram
from stemsim.trainer import TrainedModel

from .types import EmbeddingIndex


def embed_corpus(model: TrainedModel, segments: List[MelSpectrogram], chunk: int = 64) -> EmbeddingIndex:
    """One entry per segment, ordered by (track_id, segment_index)."""
    arch = model.params.arch
    if not segments:
        return EmbeddingIndex(model.role, model.trial, [], np.zeros((0, arch.embedding_dim)))

    wrong_role = sorted({s.instrument for s in segments if s.instrument != model.role})
    if wrong_role:
        raise StemSimError(
            ErrorCode.VALIDATION_ERROR,
            f"Segments of role(s) {wrong_role} given to a '{model.role}' model",
            {"model_role": model.role, "segment_roles": wrong_role},
        )
    bad = [s.values.shape for s in segments if tuple(s.values.shape) != tuple(arch.input_shape)]
    if bad:
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Segment features do not match the encoder input shape",
            {"got": list(bad[0]), "expected": list(arch.input_shape)},
        )

    ordered = sorted(segments, key=lambda s: (s.track_id, s.segment_index))
    x = np.stack([s.values for s in ordered]).astype(np.float64)
    return EmbeddingIndex(
        instrument=model.role,
        trial=model.trial,
        keys=[(s.track_id, s.segment_index) for s in ordered],
        embeddings=embed(model.params, x, chunk),
    )
