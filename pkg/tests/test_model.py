import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfinr.autodiff import Tape, Tensor, backward
from lfinr.lightfield import crop_center
from lfinr.model import (
    Block, ConfigError, ModelConfig, PositionalEncodingConfig, build_model, channel_schedule,
    config_for_field, decode_all, decode_view, forward, is_prunable, parameter_count,
    parameter_shapes, positional_encoding,
)
from lfinr.train import loss_fn


def desk_cfg(**kw):
    base = dict(pe=PositionalEncodingConfig(1.25, 4), mlp_hidden=16, h0=3, w0=4, c0=8,
                blocks=(Block(2, 8), Block(2, 6), Block(2, 4)), out_H=24, out_W=32,
                crop_H=20, crop_W=30, U=3, V=3)
    base.update(kw)
    return ModelConfig(**base)


def test_pe_center_and_scalar_values():
    pe = positional_encoding((1, 1), 3, 3, PositionalEncodingConfig(b=1.25, L=2), dtype=np.float64)
    np.testing.assert_array_equal(pe, [0, 0, 1, 1, 0, 0, 1, 1])
    # u index U-1 normalizes to +0.1.
    pe = positional_encoding((4, 0), 5, 1, PositionalEncodingConfig(b=2.0, L=1), dtype=np.float64)
    assert pe[0] == pytest.approx(0.587785, abs=1e-6)
    assert pe[1] == pytest.approx(0.809017, abs=1e-6)
    assert pe[2] == 0.0 and pe[3] == 1.0


@given(st.integers(1, 15), st.integers(1, 15), st.data(), st.floats(1.0, 3.0), st.integers(1, 12))
def test_pe_entries_bounded(U, V, data, b, L):
    u = data.draw(st.integers(0, U - 1))
    v = data.draw(st.integers(0, V - 1))
    pe = positional_encoding((u, v), U, V, PositionalEncodingConfig(b, L))
    assert pe.shape == (4 * L,)
    assert np.all(np.abs(pe) <= 1.0)


def test_full_scale_shapes():
    cfg = config_for_field(11, 11, 434, 625, [2, 2, 5, 2, 2], c0=64, mlp_hidden=512,
                           pe_b=1.25, pe_L=40)
    assert (cfg.h0, cfg.w0) == (6, 8)
    assert (cfg.out_H, cfg.out_W) == (480, 640)


def test_desk_forward_shape_and_range():
    m = build_model(desk_cfg(), seed=0)
    for u in range(3):
        for v in range(3):
            y = forward(m, (u, v))
            assert y.shape == (3, 20, 30)
            assert np.all((y.data > 0) & (y.data < 1))
    assert decode_view(m, (0, 0)).shape == (20, 30, 3)


def test_config_errors():
    with pytest.raises(ConfigError):
        desk_cfg(out_H=25).validate()
    with pytest.raises(ConfigError):
        desk_cfg(pe=PositionalEncodingConfig(1.25, 0)).validate()
    with pytest.raises(ConfigError):
        desk_cfg(crop_W=40).validate()
    with pytest.raises(ConfigError):
        build_model(desk_cfg(pe=PositionalEncodingConfig(0.5, 2)))


def test_config_json_roundtrip():
    cfg = desk_cfg(residual_post_activation=False)
    assert ModelConfig.from_json(cfg.to_json()) == cfg


def test_channel_schedule():
    assert channel_schedule(64, 5) == [64, 32, 16, 12, 12]
    assert channel_schedule(64, 5, c_min=4) == [64, 32, 16, 8, 4]


def test_build_deterministic_and_init_bounds():
    a = build_model(desk_cfg(), seed=3)
    b = build_model(desk_cfg(), seed=3)
    c = build_model(desk_cfg(), seed=4)
    for k in a.params:
        assert a.params[k].data.tobytes() == b.params[k].data.tobytes()
        shape = a.params[k].shape
        if k.endswith(".b"):
            assert not a.params[k].data.any()
        else:
            bound = math.sqrt(1.0 / np.prod(shape[1:]))
            assert np.abs(a.params[k].data).max() <= bound
    assert not np.array_equal(a.params["mlp.fc1.W"].data, c.params["mlp.fc1.W"].data)


def test_parameter_names_and_prunability():
    names = list(parameter_shapes(desk_cfg()))
    assert names[:4] == ["mlp.fc1.W", "mlp.fc1.b", "mlp.fc2.W", "mlp.fc2.b"]
    assert names[-2:] == ["head.conv.K", "head.conv.b"]
    assert "block1.res.conv2.K" in names
    assert is_prunable("block0.nerv.conv.K") and is_prunable("mlp.fc2.W")
    assert not is_prunable("block0.nerv.conv.b") and not is_prunable("head.conv.K")


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(1, 24),
       st.integers(1, 40), st.integers(1, 6), st.integers(1, 6), st.data())
def test_parameter_count_formula(L, factors, c0, hidden, h, w, data):
    scale = math.prod(factors)
    channels = data.draw(st.lists(st.integers(1, 20), min_size=len(factors), max_size=len(factors)))
    cfg = ModelConfig(pe=PositionalEncodingConfig(1.5, L), mlp_hidden=hidden, h0=h, w0=w, c0=c0,
                      blocks=tuple(Block(f, c) for f, c in zip(factors, channels)),
                      out_H=h * scale, out_W=w * scale,
                      crop_H=data.draw(st.integers(1, h * scale)),
                      crop_W=data.draw(st.integers(1, w * scale)), U=2, V=3)
    cfg.validate()
    m = build_model(cfg, seed=0)
    assert parameter_count(cfg) == m.num_parameters()
    assert forward(m, (1, 2)).shape == (3, cfg.crop_H, cfg.crop_W)


def test_forward_bitwise_reproducible_and_decode_view_matches():
    m = build_model(desk_cfg(), seed=1)
    full = decode_all(m)
    for u in range(3):
        for v in range(3):
            one = decode_view(m, (u, v))
            assert one.tobytes() == full[u, v].tobytes()
            assert decode_view(m, (u, v)).tobytes() == one.tobytes()


def test_forward_crops_center_of_full_output():
    cfg = desk_cfg()
    m = build_model(cfg, seed=2)
    full = build_model(desk_cfg(crop_H=24, crop_W=32), seed=2)
    big = decode_view(full, (1, 2))
    np.testing.assert_array_equal(decode_view(m, (1, 2)), crop_center(big, 20, 30))


def test_off_grid_coordinates():
    m = build_model(desk_cfg(), seed=0)
    with pytest.raises(ValueError):
        forward(m, (3, 0))
    with pytest.raises(ValueError):
        forward(m, (0.5, 0.5))
    with pytest.warns(UserWarning, match="experimental"):
        img = decode_view(m, (0.5, 0.5), experimental=True)
    assert img.shape == (20, 30, 3)


def test_clamp_output_switch():
    m = build_model(desk_cfg(output_activation="clamp"), seed=0)
    y = forward(m, (0, 0)).data
    assert y.min() >= 0 and y.max() <= 1


@pytest.mark.parametrize("seed", range(10))
def test_gradient_reaches_every_parameter(seed):
    m = build_model(desk_cfg(), seed=seed)
    target = Tensor(np.random.default_rng(seed).random((3, 20, 30)).astype(np.float32))
    with Tape():
        loss = loss_fn(forward(m, (seed % 3, seed // 3 % 3)), target, 0.7)
    backward(loss, m.parameters())
    for name, p in m.params.items():
        assert np.any(p.grad != 0), name
