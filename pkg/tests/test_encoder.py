from __future__ import annotations

import numpy as np
import pytest

from stemsim.encoder import (
    EncoderArch,
    backward,
    embed,
    forward,
    forward_batch,
    init_params,
    load_model,
    model_bytes,
    save_model,
)
from stemsim.encoder.layers import l2_normalize_backward, l2_normalize_forward
from stemsim.errors import ErrorCode, StemSimError
from stemsim.features import MelSpectrogram


def test_default_arch_shapes():
    arch = EncoderArch()
    assert arch.input_shape == (128, 255)
    assert arch.spatial_shapes()[-1] == (7, 15)
    shapes = arch.tensor_shapes()
    assert list(shapes) == [
        "conv0.weight", "conv0.bias", "conv1.weight", "conv1.bias",
        "conv2.weight", "conv2.bias", "conv3.weight", "conv3.bias",
        "fc.weight", "fc.bias",
    ]
    assert shapes["fc.weight"] == (128, 128)


def test_collapsed_input_rejected():
    with pytest.raises(StemSimError) as e:
        EncoderArch(input_shape=(8, 8))
    assert e.value.code == ErrorCode.VALIDATION_ERROR
    assert e.value.details["path"][0] == "encoder"


def test_he_initialization():
    params = init_params(EncoderArch(), seed=0)
    w = params.tensors["conv1.weight"]
    assert w.std() == pytest.approx(np.sqrt(2.0 / (32 * 9)), rel=0.05)
    assert abs(w.mean()) < 0.01
    assert not np.any(params.tensors["conv1.bias"])
    assert np.array_equal(init_params(EncoderArch(), 0).tensors["fc.weight"], params.tensors["fc.weight"])


def test_unit_norm_embeddings(tiny_arch, rng):
    params = init_params(tiny_arch, seed=3)
    e = embed(params, rng.standard_normal((1000, *tiny_arch.input_shape)), chunk=128)
    assert e.shape == (1000, 8)
    assert np.max(np.abs(np.linalg.norm(e, axis=1) - 1.0)) < 1e-6


def test_single_forward_matches_batch(tiny_arch, rng):
    params = init_params(tiny_arch, seed=3)
    x = rng.standard_normal((4, *tiny_arch.input_shape))
    batch, _ = forward_batch(params, x)
    one, _ = forward(params, MelSpectrogram("T", "drums", 0, x[2]))
    np.testing.assert_allclose(one, batch[2], rtol=0, atol=1e-12)


def test_zero_pre_normalization_maps_to_e1(tiny_arch, rng):
    params = init_params(tiny_arch, seed=3)
    params.tensors["fc.weight"][:] = 0.0
    e, cache = forward_batch(params, rng.standard_normal((2, *tiny_arch.input_shape)))
    np.testing.assert_array_equal(e, np.tile(np.eye(8)[0], (2, 1)))
    grads = backward(cache, rng.standard_normal(e.shape))
    assert all(not np.any(g) for g in grads.values())


def test_normalization_gradient_is_tangent(rng):
    v = rng.standard_normal((5, 8))
    e, norms = l2_normalize_forward(v)
    dv = l2_normalize_backward(rng.standard_normal((5, 8)), e, norms)
    np.testing.assert_allclose(np.sum(dv * e, axis=1), 0.0, atol=1e-12)


def test_backward_needs_cache(tiny_arch, rng):
    params = init_params(tiny_arch, seed=0)
    e, cache = forward_batch(params, rng.standard_normal((2, *tiny_arch.input_shape)), keep_cache=False)
    with pytest.raises(StemSimError) as err:
        backward(cache, np.ones_like(e))
    assert err.value.code == ErrorCode.STALE_CACHE


def test_backward_shape_mismatch(tiny_arch, rng):
    params = init_params(tiny_arch, seed=0)
    _, cache = forward_batch(params, rng.standard_normal((2, *tiny_arch.input_shape)))
    with pytest.raises(StemSimError) as err:
        backward(cache, np.ones((3, 8)))
    assert err.value.code == ErrorCode.DIMENSION_MISMATCH


def test_wrong_input_shape(tiny_arch):
    params = init_params(tiny_arch, seed=0)
    with pytest.raises(StemSimError) as err:
        forward_batch(params, np.zeros((1, 5, 5)))
    assert err.value.code == ErrorCode.DIMENSION_MISMATCH


def test_model_file_round_trip(tiny_arch, tmp_path):
    params = init_params(tiny_arch, seed=11)
    path = save_model(tmp_path / "m.model", params, meta={"role": "bass", "trial": 2})
    loaded, meta = load_model(path)
    assert meta == {"role": "bass", "trial": 2}
    assert loaded.arch == tiny_arch
    for name in params.names():
        assert np.array_equal(loaded.tensors[name], params.tensors[name])
    assert model_bytes(loaded, meta) == path.read_bytes()


def test_model_file_bad_magic(tmp_path):
    p = tmp_path / "x.model"
    p.write_bytes(b"not a model at all")
    with pytest.raises(StemSimError) as err:
        load_model(p)
    assert err.value.code == ErrorCode.VALIDATION_ERROR


def test_params_check_catches_nan(tiny_arch):
    params = init_params(tiny_arch, seed=0)
    params.tensors["fc.bias"][0] = np.nan
    with pytest.raises(StemSimError) as err:
        params.check()
    assert err.value.code == ErrorCode.NON_FINITE
