from __future__ import annotations

import math
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from stemsim.corpus import CorpusManifest, SegmentationConfig
from stemsim.encoder import EncoderArch, EncoderParams, ParamGrads, backward, forward_batch, init_params
from stemsim.errors import ErrorCode, StemSimError
from stemsim.features import FeatureConfig, load_role_features
from stemsim.observability import get_logger

from .loss import batch_triplet_objective
from .optim import optimizer_step
from .sampling import build_index, check_sampling_preconditions, sample_triplet_batch
from .types import AdamState, TrainConfig, TrainedModel, TrainingIndex

log = get_logger(__name__)


def sampling_rng(seed: int) -> np.random.Generator:
    # separate stream from the weight initialization, which uses default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))


def batch_gradients(
    params: EncoderParams, x: np.ndarray, margin: float, chunk: int
) -> tuple[float, ParamGrads]:
    """
    Loss and parameter gradients for one stacked batch x = [anchors; positives; negatives].

    When the batch is larger than `chunk` the embeddings are computed first without
    caches, then every chunk is re-run with caches and back-propagated; chunk
    gradients are summed in chunk order.
    """
    n3 = len(x)
    b = n3 // 3
    chunks = [(s, min(n3, s + chunk)) for s in range(0, n3, chunk)]

    caches = []
    parts = []
    for s, e in chunks:
        emb, cache = forward_batch(params, x[s:e], keep_cache=len(chunks) == 1)
        parts.append(emb)
        caches.append(cache)
    emb = np.concatenate(parts, axis=0)

    loss, g_a, g_p, g_n = batch_triplet_objective(emb[:b], emb[b : 2 * b], emb[2 * b :], margin)
    g = np.concatenate([g_a, g_p, g_n], axis=0)

    grads: Optional[ParamGrads] = None
    for (s, e), cache in zip(chunks, caches):
        if len(chunks) > 1:
            _, cache = forward_batch(params, x[s:e], keep_cache=True)
        part = backward(cache, g[s:e])
        if grads is None:
            grads = part
        else:
            for name in grads:
                grads[name] = grads[name] + part[name]
    return loss, grads


def train_trial(
    index: TrainingIndex, arch: EncoderArch, cfg: TrainConfig, trial: int, snapshot: Dict[str, Any]
) -> TrainedModel:
    check_sampling_preconditions(index)
    if tuple(index.features.shape[1:]) != tuple(arch.input_shape):
        raise StemSimError(
            ErrorCode.DIMENSION_MISMATCH,
            "Feature shape does not match the encoder input shape",
            {"features": list(index.features.shape[1:]), "encoder": list(arch.input_shape)},
        )

    seed = cfg.seed + trial
    params = init_params(arch, seed)
    state = AdamState.zeros_like(params.tensors)
    rng = sampling_rng(seed)

    per_epoch = cfg.triplets_per_epoch or len(index)
    n_batches = math.ceil(per_epoch / cfg.batch_size)
    history: List[float] = []

    for epoch in range(cfg.epochs):
        t0 = time.time()
        losses = []
        for _ in range(n_batches):
            triplets = sample_triplet_batch(index, cfg.batch_size, rng)
            rows = (
                [t.anchor.row for t in triplets]
                + [t.positive.row for t in triplets]
                + [t.negative.row for t in triplets]
            )
            x = index.features[rows].astype(np.float64)
            loss, grads = batch_gradients(params, x, cfg.margin, cfg.grad_chunk)
            params, state = optimizer_step(params, grads, state, cfg)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        log.info(
            "epoch done",
            extra={
                "role": index.instrument,
                "trial": trial,
                "epoch": epoch,
                "fields": {"mean_loss": history[-1], "batches": n_batches, "seconds": round(time.time() - t0, 3)},
            },
        )

    return TrainedModel(
        role=index.instrument,
        trial=trial,
        params=params,
        loss_history=history,
        config=snapshot,
        steps=state.step,
    )


def train_index(
    index: TrainingIndex, arch: EncoderArch, cfg: TrainConfig, snapshot: Optional[Dict[str, Any]] = None
) -> List[TrainedModel]:
    """One model per trial; trial t uses seed cfg.seed + t."""
    snapshot = snapshot if snapshot is not None else {"training": cfg.to_json(), "encoder": arch.to_json()}
    return [train_trial(index, arch, cfg, t, snapshot) for t in range(cfg.n_trials)]


def train(
    manifest: CorpusManifest,
    role: str,
    feature_cfg: FeatureConfig,
    seg_cfg: SegmentationConfig,
    arch: EncoderArch,
    cfg: TrainConfig,
    cache_dir: Optional[Path] = None,
    snapshot: Optional[Dict[str, Any]] = None,
) -> List[TrainedModel]:
    feats = load_role_features(manifest, "train", role, seg_cfg, feature_cfg, cache_dir)
    if not feats:
        raise StemSimError(
            ErrorCode.PRECONDITION_FAILED,
            f"Training split has no audio for role '{role}'",
            {"role": role},
        )
    index = build_index(role, feats)
    log.info(
        "training index built",
        extra={"role": role, "fields": {"segments": len(index), "tracks": len(index.track_ranges)}},
    )
    return train_index(index, arch, cfg, snapshot)
