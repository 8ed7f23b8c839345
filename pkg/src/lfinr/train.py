"""Overfitting the model to a light field: L1+SSIM loss, Adam, cosine schedule."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError, Tape, Tensor, backward
from .lightfield import LightField
from .metrics import SSIM_K1, SSIM_K2, psnr, valid_filter_matrix
from .model import Model, forward, is_prunable


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, detail: str = ""):
        super().__init__(f"training diverged at epoch {epoch}" + (f": {detail}" if detail else ""))
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 5e-4
    lr_min: float = 0.0
    alpha: float = 0.7
    batch: int = 1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    finetune_epochs: int = 200
    finetune_lr: float | None = None  # None: reuse ``lr``

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lr < 0 or self.epochs < 1 or self.batch < 1:
            raise ValueError("need lr >= 0, epochs >= 1, batch >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    psnr: float
    lr: float
    seconds: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    CSV_HEADER = ("epoch", "loss", "psnr", "lr", "seconds")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.records:
            w.writerow([r.epoch, repr(r.loss), repr(r.psnr), repr(r.lr), f"{r.seconds:.6f}"])
        return buf.getvalue()

    def deterministic_rows(self):
        """Records without wall-clock time, for reproducibility checks."""
        return [(r.epoch, r.loss, r.psnr, r.lr) for r in self.records]

    def best_psnr(self, upto: int | None = None) -> float:
        recs = self.records if upto is None else self.records[:upto]
        return max(r.psnr for r in recs)


def cosine_lr(epoch: int, cfg: TrainConfig) -> float:
    if cfg.epochs == 1:
        return cfg.lr
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1 + math.cos(math.pi * epoch / (cfg.epochs - 1)))


@lru_cache(maxsize=16)
def _ssim_filters(h: int, w: int, dtype: str):
    return valid_filter_matrix(h).astype(dtype), valid_filter_matrix(w).astype(dtype)


def ssim_tensor(pred: Tensor, gt: Tensor) -> Tensor:
    """Differentiable mean SSIM of ``(C, H, W)`` tensors, averaged over channels."""
    _, h, w = pred.shape
    rows, cols = _ssim_filters(h, w, pred.dtype.str)

    def filt(t):
        return ad.separable_filter(t, rows, cols)

    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mu_p, mu_g = filt(pred), filt(gt)
    mu_pg = mu_p * mu_g
    mu_p2, mu_g2 = mu_p * mu_p, mu_g * mu_g
    var_p = filt(pred * pred) - mu_p2
    var_g = filt(gt * gt) - mu_g2
    cov = filt(pred * gt) - mu_pg
    num = (mu_pg * 2.0 + c1) * (cov * 2.0 + c2)
    den = (mu_p2 + mu_g2 + c1) * (var_p + var_g + c2)
    return ad.mean(num / den)


def loss_fn(pred: Tensor, gt: Tensor, alpha: float) -> Tensor:
    """``alpha * mean|pred - gt| + (1 - alpha) * (1 - SSIM_rgb(pred, gt))``."""
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and target {gt.shape} differ")
    l1 = ad.abs_mean(pred - gt)
    if alpha == 1.0:
        return l1 * alpha
    return l1 * alpha + (1.0 - ssim_tensor(pred, gt)) * (1.0 - alpha)


class Adam:
    """Bias-corrected Adam over a dict of named parameter tensors."""

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.t = 0

    def step(self, lr: float, masks: dict[str, np.ndarray] | None = None) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ValueError(f"{name}: gradient shape {g.shape} != parameter {p.data.shape}")
            mask = masks.get(name) if masks else None
            if mask is not None:
                g = g * mask
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)
            p.data -= update
            if mask is not None:
                p.data *= mask


def adam_step(params, grads, state: Adam | None, lr: float) -> Adam:
    """Functional wrapper: assign ``grads`` and apply one Adam update."""
    if state is None:
        state = Adam(params)
    for k, g in grads.items():
        params[k].grad = g
    state.step(lr)
    return state


def _check_field(model: Model, lf: LightField) -> None:
    cfg = model.config
    if (lf.U, lf.V, lf.H, lf.W) != (cfg.U, cfg.V, cfg.crop_H, cfg.crop_W):
        raise ValueError(
            f"light field {lf.U}x{lf.V}x{lf.H}x{lf.W} does not match model "
            f"{cfg.U}x{cfg.V}x{cfg.crop_H}x{cfg.crop_W}")


def _run(model: Model, lf: LightField, cfg: TrainConfig, epochs: int,
         masks: dict[str, np.ndarray] | None, on_epoch=None) -> TrainLog:
    _check_field(model, lf)
    if masks is not None:
        for name, mask in masks.items():
            if mask.shape != model.params[name].shape:
                raise ValueError(f"mask for {name} has shape {mask.shape}")
            model.params[name].data *= mask
    dtype = model.params["mlp.fc1.W"].dtype
    targets = np.ascontiguousarray(lf.views.transpose(0, 1, 4, 2, 3), dtype=dtype)
    coords = lf.coords()
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg.beta1, cfg.beta2, cfg.eps)
    run_cfg = TrainConfig(**{**cfg.to_dict(), "epochs": epochs})
    log = TrainLog()
    params = model.parameters()
    for epoch in range(epochs):
        t0 = time.perf_counter()
        lr = cosine_lr(epoch, run_cfg)
        order = rng.permutation(len(coords))
        losses, psnrs = [], []
        try:
            for start in range(0, len(order), cfg.batch):
                batch = order[start:start + cfg.batch]
                model.zero_grad()
                with Tape():
                    total = None
                    for idx in batch:
                        u, v = coords[idx]
                        gt = Tensor(targets[u, v])
                        pred = forward(model, (u, v))
                        psnrs.append(psnr(pred.data, gt.data))
                        term = loss_fn(pred, gt, cfg.alpha)
                        total = term if total is None else total + term
                    if len(batch) > 1:
                        total = total * (1.0 / len(batch))
                if not np.isfinite(total.data):
                    raise NumericError("non-finite loss")
                losses.append(float(total.data))
                backward(total, params)
                opt.step(lr, masks)
        except NumericError as exc:
            raise TrainingDiverged(epoch, str(exc)) from exc
        log.records.append(EpochRecord(epoch, float(np.mean(losses)), float(np.mean(psnrs)), lr,
                                       time.perf_counter() - t0))
        if on_epoch is not None:
            on_epoch(log.records[-1])
    model.zero_grad()
    return log


def train(model: Model, lf: LightField, cfg: TrainConfig, on_epoch=None) -> tuple[Model, TrainLog]:
    """Overfit ``model`` (in place) to ``lf`` for ``cfg.epochs`` epochs."""
    log = _run(model, lf, cfg, cfg.epochs, None, on_epoch)
    return model, log


def finetune_masked(model: Model, lf: LightField, masks: dict[str, np.ndarray],
                    cfg: TrainConfig, on_epoch=None) -> tuple[Model, TrainLog]:
    """Like :func:`train` for ``cfg.finetune_epochs``, holding masked-out weights at exactly 0."""
    missing = [k for k in model.params if is_prunable(k) and k not in masks]
    if missing:
        raise ValueError(f"no mask for prunable tensors {missing}")
    masks = {k: np.asarray(m, dtype=model.params[k].dtype) for k, m in masks.items()}
    if cfg.finetune_lr is not None:
        cfg = TrainConfig(**{**cfg.to_dict(), "lr": cfg.finetune_lr})
    log = _run(model, lf, cfg, cfg.finetune_epochs, masks, on_epoch)
    return model, log
