from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from stemsim.corpus import load_manifest
from stemsim.encoder import ConvBlock, EncoderArch, model_bytes
from stemsim.errors import ErrorCode, StemSimError
from stemsim.features import MelSpectrogram
from stemsim.trainer import (
    AdamState,
    TrainConfig,
    adam_update,
    build_index,
    check_sampling_preconditions,
    cosine_distance,
    load_run,
    sample_triplet_batch,
    sampling_rng,
    save_run,
    train,
    train_index,
    triplet_loss,
    triplet_loss_grad,
)


def _feats(track_sizes, shape, seed=0, role="drums"):
    rng = np.random.default_rng(seed)
    out = []
    for t, size in enumerate(track_sizes):
        for i in range(size):
            out.append(MelSpectrogram(f"T{t:02d}", role, i, rng.standard_normal(shape).astype(np.float32)))
    return out


# --- distance and loss ---------------------------------------------------------


def test_cosine_distance_cases():
    a = np.array([1.0, 0.0, 0.0])
    assert cosine_distance(a, a) == 0.0
    assert cosine_distance(a, np.array([0.0, 1.0, 0.0])) == pytest.approx(1.0)
    assert cosine_distance(a, -a) == 2.0
    with pytest.raises(StemSimError) as e:
        cosine_distance(a, np.zeros(3))
    assert e.value.code == ErrorCode.DEGENERATE_INPUT


def test_triplet_loss_cases():
    assert triplet_loss(0.3, 0.9, 0.2) == 0.0
    for d in (0.0, 0.4, 1.7):
        assert triplet_loss(d, d, 0.2) == 0.2
    assert triplet_loss(0.9, 0.3, 0.2) == max(0.9 - 0.3 + 0.2, 0.0)
    assert triplet_loss(0.9, 0.3, 0.2) == pytest.approx(0.8)


def test_triplet_loss_grad_boundary_is_zero():
    assert triplet_loss_grad(0.9, 0.3, 0.2) == (1.0, -1.0)
    assert triplet_loss_grad(0.3, 0.5, 0.2) == (0.0, 0.0)
    assert triplet_loss_grad(0.3, 0.9, 0.2) == (0.0, 0.0)


# --- sampling ------------------------------------------------------------------


def test_sampled_triplets_are_valid():
    index = build_index("drums", _feats([3, 5, 2, 4], (2, 2)))
    batch = sample_triplet_batch(index, 64, np.random.default_rng(0))
    assert len(batch) == 64
    assert all(t.is_valid() for t in batch)


def test_sampling_is_deterministic():
    index = build_index("drums", _feats([3, 5, 2], (2, 2)))
    a = sample_triplet_batch(index, 32, sampling_rng(4))
    b = sample_triplet_batch(index, 32, sampling_rng(4))
    assert a == b


def test_sampling_marginals():
    index = build_index("drums", _feats([2, 3, 5], (2, 2)))
    batch = sample_triplet_batch(index, 6000, np.random.default_rng(1))
    anchors = Counter(t.anchor.row for t in batch)
    assert set(anchors) == set(range(10))
    assert all(450 < c < 750 for c in anchors.values())
    # anchors from the 2-segment track always pair with the other segment
    for t in batch:
        if t.anchor.track_id == "T00":
            assert t.positive.row == 1 - t.anchor.row
    negatives_for_t00 = Counter(t.negative.row for t in batch if t.anchor.track_id == "T00")
    assert set(negatives_for_t00) == set(range(2, 10))


def test_balanced_sampling_is_uniform_over_tracks():
    index = build_index("drums", _feats([4] * 5, (2, 2)))
    batch = sample_triplet_batch(index, 10_000, np.random.default_rng(2))
    uniform = 10_000 / 5
    anchor_tracks = Counter(t.anchor.track_id for t in batch)
    assert len(anchor_tracks) == 5
    assert all(0.8 * uniform <= c <= 1.2 * uniform for c in anchor_tracks.values())

    for track in anchor_tracks:
        negatives = Counter(t.negative.track_id for t in batch if t.anchor.track_id == track)
        assert set(negatives) == set(anchor_tracks) - {track}
        expected = anchor_tracks[track] / 4
        assert all(0.8 * expected <= c <= 1.2 * expected for c in negatives.values())


def test_sampling_preconditions():
    with pytest.raises(StemSimError) as e:
        check_sampling_preconditions(build_index("drums", _feats([5], (2, 2))))
    assert e.value.code == ErrorCode.PRECONDITION_FAILED
    with pytest.raises(StemSimError) as e:
        check_sampling_preconditions(build_index("drums", _feats([3, 1], (2, 2))))
    assert e.value.code == ErrorCode.PRECONDITION_FAILED


def test_index_rows_grouped_by_track():
    feats = _feats([2, 3], (2, 2))
    index = build_index("drums", list(reversed(feats)))
    assert index.keys == [("T00", 0), ("T00", 1), ("T01", 0), ("T01", 1), ("T01", 2)]
    assert index.track_ranges == {"T00": (0, 2), "T01": (2, 5)}
    assert index.features.dtype == np.float32


# --- Adam ----------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    tensors = {"w": np.array([1.0, -2.0])}
    new, state = adam_update(tensors, {"w": np.zeros(2)}, AdamState.zeros_like(tensors), TrainConfig())
    np.testing.assert_array_equal(new["w"], tensors["w"])
    assert state.step == 1


def test_adam_first_step_moves_by_learning_rate():
    tensors = {"w": np.array([1.0])}
    cfg = TrainConfig(learning_rate=1e-3)
    new, _ = adam_update(tensors, {"w": np.array([5.0])}, AdamState.zeros_like(tensors), cfg)
    assert new["w"][0] == pytest.approx(1.0 - 1e-3, abs=1e-9)


def test_adam_descends_quadratic():
    tensors = {"w": np.array([1.0])}
    state = AdamState.zeros_like(tensors)
    cfg = TrainConfig(learning_rate=1e-3)
    previous = 1.0
    for _ in range(100):
        tensors, state = adam_update(tensors, {"w": 2.0 * tensors["w"]}, state, cfg)
        assert abs(tensors["w"][0]) < previous
        previous = abs(tensors["w"][0])


def test_adam_rejects_bad_gradients():
    tensors = {"w": np.ones(2)}
    state = AdamState.zeros_like(tensors)
    with pytest.raises(StemSimError) as e:
        adam_update(tensors, {"w": np.array([np.inf, 0.0])}, state, TrainConfig())
    assert e.value.code == ErrorCode.NON_FINITE
    with pytest.raises(StemSimError) as e:
        adam_update(tensors, {"v": np.ones(2)}, state, TrainConfig())
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH


def test_train_config_validation():
    with pytest.raises(StemSimError) as e:
        TrainConfig(batch_size=0)
    assert e.value.details["path"] == ["training", "batch_size"]


# --- training loop -------------------------------------------------------------


def test_training_is_deterministic(tiny_arch):
    index = build_index("drums", _feats([3, 3, 3], tiny_arch.input_shape, seed=4))
    cfg = TrainConfig(epochs=3, batch_size=4, triplets_per_epoch=8, n_trials=2, seed=5, learning_rate=1e-3)
    a = train_index(index, tiny_arch, cfg)
    b = train_index(index, tiny_arch, cfg)
    assert [m.trial for m in a] == [0, 1]
    for ma, mb in zip(a, b):
        assert len(ma.loss_history) == 3
        assert np.max(np.abs(np.subtract(ma.loss_history, mb.loss_history))) <= 1e-12
        assert model_bytes(ma.params) == model_bytes(mb.params)
    assert model_bytes(a[0].params) != model_bytes(a[1].params)


def test_single_step_epoch(tiny_arch):
    index = build_index("drums", _feats([3, 3], tiny_arch.input_shape))
    cfg = TrainConfig(epochs=1, batch_size=64, triplets_per_epoch=64, n_trials=1)
    (model,) = train_index(index, tiny_arch, cfg)
    assert model.steps == 1


def test_train_rejects_mismatched_arch(tiny_arch):
    index = build_index("drums", _feats([3, 3], (5, 5)))
    with pytest.raises(StemSimError) as e:
        train_index(index, tiny_arch, TrainConfig(epochs=1, n_trials=1))
    assert e.value.code == ErrorCode.DIMENSION_MISMATCH


def test_train_from_corpus_and_run_files(small_corpus, small_features, small_segmentation, tmp_path):
    manifest = load_manifest(small_corpus)
    arch = EncoderArch(conv_blocks=(ConvBlock(4), ConvBlock(8)), embedding_dim=8, input_shape=(16, 61))
    cfg = TrainConfig(epochs=2, batch_size=8, n_trials=2, seed=1, learning_rate=1e-3)
    models = train(manifest, "drums", small_features, small_segmentation, arch, cfg)
    assert len(models) == 2
    assert all(np.all(np.isfinite(m.loss_history)) for m in models)

    run_dir = save_run(tmp_path / "drums", models)
    assert sorted(p.name for p in run_dir.iterdir()) == [
        "config.json", "trial_0.model", "trial_0_loss.csv", "trial_1.model", "trial_1_loss.csv"
    ]
    loaded = load_run(run_dir)
    assert [m.role for m in loaded] == ["drums", "drums"]
    assert [m.seed for m in loaded] == [1, 2]
    for a, b in zip(models, loaded):
        assert a.loss_history == b.loss_history
        assert model_bytes(a.params) == model_bytes(b.params)


def test_load_run_missing(tmp_path):
    with pytest.raises(StemSimError) as e:
        load_run(tmp_path / "nope")
    assert e.value.code == ErrorCode.NOT_FOUND
