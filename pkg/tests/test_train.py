import math

import numpy as np
import pytest

from lfinr.autodiff import Tensor, precision
from lfinr.codec import global_masks, sparsity
from lfinr.lightfield import LightField
from lfinr.model import Block, ModelConfig, PositionalEncodingConfig, build_model, is_prunable
from lfinr.synth import synth_lightfield
from lfinr.train import (
    Adam, TrainConfig, TrainingDiverged, adam_step, cosine_lr, finetune_masked, loss_fn, train,
)


def small_setup(seed=0):
    cfg = ModelConfig(pe=PositionalEncodingConfig(1.25, 4), mlp_hidden=16, h0=3, w0=3, c0=8,
                      blocks=(Block(2, 8), Block(2, 4)), out_H=12, out_W=12, crop_H=11, crop_W=12,
                      U=2, V=2)
    lf = synth_lightfield(seed=seed, U=2, V=2, H=11, W=12, n_rects=1)
    return build_model(cfg, seed=seed), lf


def test_loss_examples():
    with precision(np.float64):
        gt = Tensor(np.random.default_rng(0).random((3, 12, 12)))
        assert loss_fn(gt, gt, 0.7).data == pytest.approx(0.0, abs=1e-12)
        shifted = Tensor(gt.data * 0.8 + 0.1)
        off = Tensor(np.clip(gt.data, 0, 0.9) + 0.1)
        assert loss_fn(off, Tensor(np.clip(gt.data, 0, 0.9)), 1.0).data == pytest.approx(0.1)
        assert loss_fn(shifted, gt, 0.7).data > 0
        a, b = Tensor(np.full((3, 11, 11), 0.25)), Tensor(np.full((3, 11, 11), 0.75))
        expect = 1 - (0.375 + 1e-4) / (0.625 + 1e-4)
        assert loss_fn(a, b, 0.0).data == pytest.approx(expect, abs=1e-12)
        with pytest.raises(ValueError):
            loss_fn(a, Tensor(np.zeros((3, 11, 12))), 0.5)


def test_loss_nonnegative_on_random_pairs():
    rng = np.random.default_rng(1)
    with precision(np.float64):
        for _ in range(20):
            p, g = rng.random((2, 3, 12, 13))
            assert loss_fn(Tensor(p), Tensor(g), rng.random()).data >= 0


def test_cosine_schedule():
    cfg = TrainConfig(epochs=101)
    assert cosine_lr(0, cfg) == 5e-4
    assert cosine_lr(100, cfg) == pytest.approx(0.0, abs=1e-20)
    assert cosine_lr(50, cfg) == pytest.approx(2.5e-4)
    assert cosine_lr(0, TrainConfig(epochs=1)) == 5e-4
    with pytest.raises(ValueError):
        TrainConfig(alpha=1.5)


def test_adam_first_step_and_zero_grad():
    p = {"w": Tensor(np.zeros(4), requires_grad=True)}
    state = adam_step(p, {"w": np.ones(4)}, None, 1e-3)
    np.testing.assert_allclose(p["w"].data, -1e-3, rtol=1e-7)
    before = p["w"].data.copy()
    state = adam_step(p, {"w": np.zeros(4)}, state, 0.0)
    assert state.t == 2
    np.testing.assert_array_equal(p["w"].data, before)


def test_adam_zero_gradient_keeps_params_from_start():
    p = {"w": Tensor(np.arange(3.0), requires_grad=True)}
    state = adam_step(p, {"w": np.zeros(3)}, None, 1e-2)
    np.testing.assert_array_equal(p["w"].data, np.arange(3.0))
    assert state.t == 1


def test_adam_deterministic():
    outs = []
    for _ in range(2):
        p = {"w": Tensor(np.linspace(-1, 1, 5), requires_grad=True)}
        st = None
        for g in (np.array([0.1, -0.2, 0.3, 0.0, 1.0]),) * 2:
            st = adam_step(p, {"w": g}, st, 1e-2)
        outs.append(p["w"].data.tobytes())
    assert outs[0] == outs[1]


def test_adam_rejects_shape_drift():
    p = {"w": Tensor(np.zeros(3), requires_grad=True)}
    opt = Adam(p)
    p["w"].grad = np.zeros(4)
    with pytest.raises(ValueError):
        opt.step(1e-3)


def test_train_zero_lr_is_noop():
    m, lf = small_setup()
    before = m.state_dict()
    _, log = train(m, lf, TrainConfig(epochs=1, lr=0.0))
    assert len(log.records) == 1
    for k, v in m.state_dict().items():
        assert v.tobytes() == before[k].tobytes()


def test_train_deterministic_and_lr_trace():
    logs, states = [], []
    cfg = TrainConfig(epochs=6, lr=1e-3, seed=5)
    for _ in range(2):
        m, lf = small_setup()
        _, log = train(m, lf, cfg)
        logs.append(log)
        states.append(m.state_dict())
    assert logs[0].deterministic_rows() == logs[1].deterministic_rows()
    for k in states[0]:
        assert states[0][k].tobytes() == states[1][k].tobytes()
    assert [r.lr for r in logs[0].records] == [cosine_lr(e, cfg) for e in range(6)]
    assert logs[0].records[-1].loss < logs[0].records[0].loss


def test_train_log_csv():
    m, lf = small_setup()
    _, log = train(m, lf, TrainConfig(epochs=2))
    lines = log.to_csv().splitlines()
    assert lines[0] == "epoch,loss,psnr,lr,seconds"
    assert len(lines) == 3
    assert float(lines[1].split(",")[1]) == log.records[0].loss


def test_train_rejects_mismatched_field():
    m, _ = small_setup()
    lf = synth_lightfield(seed=0, U=3, V=3, H=11, W=12)
    with pytest.raises(ValueError):
        train(m, lf, TrainConfig(epochs=1))


def test_divergence_reports_epoch():
    m, lf = small_setup()
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingDiverged) as info:
            train(m, lf, TrainConfig(epochs=5, lr=1e30))
    assert 0 <= info.value.epoch < 5


def test_finetune_all_ones_equals_train():
    cfg = TrainConfig(epochs=3, finetune_epochs=3, lr=1e-3, seed=2)
    m1, lf = small_setup()
    m2, _ = small_setup()
    train(m1, lf, cfg)
    masks = {k: np.ones(t.shape, dtype=np.uint8) for k, t in m2.params.items() if is_prunable(k)}
    finetune_masked(m2, lf, masks, cfg)
    for k in m1.params:
        assert m1.params[k].data.tobytes() == m2.params[k].data.tobytes()


def test_finetune_all_zero_masks_freeze_weights_only():
    m, lf = small_setup()
    train(m, lf, TrainConfig(epochs=2))
    before = m.state_dict()
    masks = {k: np.zeros(t.shape, dtype=np.uint8) for k, t in m.params.items() if is_prunable(k)}
    finetune_masked(m, lf, masks, TrainConfig(finetune_epochs=2, lr=1e-3))
    for k, t in m.params.items():
        if k in masks:
            assert not t.data.any()
    # Biases downstream of the last zeroed kernel still receive gradient.
    for k in ("head.conv.b", "block1.res.conv2.b"):
        assert not np.array_equal(m.params[k].data, before[k]), k


def test_finetune_keeps_pruned_weights_at_zero_every_step():
    m, lf = small_setup()
    train(m, lf, TrainConfig(epochs=2))
    masks = global_masks({k: t.data for k, t in m.params.items() if is_prunable(k)}, 0.8)
    zeros_before, _ = sparsity(masks)

    def check(_record):
        for k, mask in masks.items():
            assert not m.params[k].data[mask == 0].any()

    finetune_masked(m, lf, masks, TrainConfig(finetune_epochs=4, lr=1e-3), on_epoch=check)
    check(None)
    assert sparsity(masks)[0] == zeros_before
    counted = sum(int((m.params[k].data == 0).sum()) for k in masks)
    assert counted >= zeros_before


def test_finetune_requires_all_masks():
    m, lf = small_setup()
    with pytest.raises(ValueError, match="no mask"):
        finetune_masked(m, lf, {"mlp.fc1.W": np.ones((16, 16), dtype=np.uint8)}, TrainConfig())
    masks = {k: np.ones(t.shape, dtype=np.uint8) for k, t in m.params.items() if is_prunable(k)}
    masks["mlp.fc1.W"] = np.ones((2, 2), dtype=np.uint8)
    with pytest.raises(ValueError, match="shape"):
        finetune_masked(m, lf, masks, TrainConfig(finetune_epochs=1))


def test_finetune_lr_override():
    m, lf = small_setup()
    masks = {k: np.ones(t.shape, dtype=np.uint8) for k, t in m.params.items() if is_prunable(k)}
    _, log = finetune_masked(m, lf, masks, TrainConfig(finetune_epochs=2, finetune_lr=3e-3))
    assert log.records[0].lr == 3e-3
    assert math.isclose(log.records[1].lr, 0.0, abs_tol=1e-18)


def test_batching_averages_views():
    m1, lf = small_setup()
    _, log = train(m1, lf, TrainConfig(epochs=2, batch=4))
    assert len(log.records) == 2 and np.isfinite(log.records[-1].loss)
