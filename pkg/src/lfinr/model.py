"""SAI-wise implicit representation: angular coordinate in, sub-aperture image out.

Pipeline::

    (u, v) -> Fourier encoding (4L) -> FC -> SiLU -> FC -> SiLU
           -> reshape (c0, h0, w0)
           -> per block: conv3x3 (-> c*s^2) -> pixel shuffle(s) -> SiLU
                         -> residual [conv3x3 -> SiLU -> conv3x3] + skip -> SiLU
           -> head conv3x3 (-> 3) -> sigmoid -> center crop

Parameter count for a config (``P = 4L``, ``F = c0*h0*w0``; block ``i``
maps ``c_{i-1} -> c_i`` at factor ``s_i`` with ``c_{-1} = c0``)::

    P*hidden + hidden + hidden*F + F
    + sum_i [9*c_{i-1}*c_i*s_i^2 + c_i*s_i^2 + 2*(9*c_i^2 + c_i)]
    + 27*c_last + 3
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .lightfield import AngularCoord

PE_RANGE = 0.1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PositionalEncodingConfig:
    b: float = 1.25
    L: int = 8


@dataclass(frozen=True)
class Block:
    factor: int
    channels: int


@dataclass(frozen=True)
class ModelConfig:
    pe: PositionalEncodingConfig
    mlp_hidden: int
    h0: int
    w0: int
    c0: int
    blocks: tuple[Block, ...]
    out_H: int
    out_W: int
    crop_H: int
    crop_W: int
    U: int
    V: int
    output_activation: str = "sigmoid"  # or "clamp"
    residual_post_activation: bool = True

    def __post_init__(self):
        # Store b at float32 precision so the bitstream header round-trips it exactly.
        object.__setattr__(self, "pe", replace(self.pe, b=float(np.float32(self.pe.b))))
        object.__setattr__(self, "blocks", tuple(
            b if isinstance(b, Block) else Block(**b) for b in self.blocks))

    def validate(self) -> None:
        if self.pe.b < 1:
            raise ConfigError("frequency base b must be >= 1")
        if self.pe.L < 1:
            raise ConfigError("number of frequencies L must be >= 1")
        if min(self.mlp_hidden, self.h0, self.w0, self.c0, self.U, self.V) < 1:
            raise ConfigError("dimensions must be positive")
        if not self.blocks:
            raise ConfigError("at least one upsampling block is required")
        if any(b.factor < 1 or b.channels < 1 for b in self.blocks):
            raise ConfigError("block factors and channels must be >= 1")
        scale = math.prod(b.factor for b in self.blocks)
        if self.h0 * scale != self.out_H or self.w0 * scale != self.out_W:
            raise ConfigError(
                f"seed {self.h0}x{self.w0} times factor {scale} != output {self.out_H}x{self.out_W}")
        if not (1 <= self.crop_H <= self.out_H and 1 <= self.crop_W <= self.out_W):
            raise ConfigError(f"crop {self.crop_H}x{self.crop_W} exceeds output {self.out_H}x{self.out_W}")
        if self.output_activation not in ("sigmoid", "clamp"):
            raise ConfigError(f"unknown output activation {self.output_activation!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = [asdict(b) for b in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["pe"] = PositionalEncodingConfig(**d["pe"])
        d["blocks"] = tuple(Block(**b) for b in d["blocks"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))


def channel_schedule(c0: int, n_blocks: int, c_min: int = 12) -> list[int]:
    """Block ``i`` outputs ``max(c0 // 2**i, c_min)`` channels."""
    return [max(c0 // (2 ** i), c_min) for i in range(n_blocks)]


def config_for_field(U: int, V: int, H: int, W: int, factors, c0: int, mlp_hidden: int,
                     pe_b: float, pe_L: int, c_min: int = 12, channels=None, **extra) -> ModelConfig:
    """Smallest seed grid whose upsampled output covers ``H x W``, cropped back to it."""
    scale = math.prod(factors)
    h0, w0 = -(-H // scale), -(-W // scale)
    if channels is None:
        channels = channel_schedule(c0, len(factors), c_min)
    cfg = ModelConfig(
        pe=PositionalEncodingConfig(b=pe_b, L=pe_L), mlp_hidden=mlp_hidden,
        h0=h0, w0=w0, c0=c0, blocks=tuple(Block(f, c) for f, c in zip(factors, channels)),
        out_H=h0 * scale, out_W=w0 * scale, crop_H=H, crop_W=W, U=U, V=V, **extra)
    cfg.validate()
    return cfg


def normalize_coord(c: float, n: int) -> float:
    if n == 1:
        return 0.0
    return 2 * PE_RANGE * c / (n - 1) - PE_RANGE


def positional_encoding(coord, U: int, V: int, pe: PositionalEncodingConfig,
                        dtype=np.float32) -> np.ndarray:
    """``[sin(2 pi b^k u), cos(2 pi b^k u), sin(2 pi b^k v), cos(2 pi b^k v)]`` blocks, k < L."""
    un = normalize_coord(coord[0], U)
    vn = normalize_coord(coord[1], V)
    freqs = 2.0 * np.pi * pe.b ** np.arange(pe.L, dtype=np.float64)
    parts = [np.sin(freqs * un), np.cos(freqs * un), np.sin(freqs * vn), np.cos(freqs * vn)]
    return np.concatenate(parts).astype(dtype)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Canonical (bitstream) order of parameter names and shapes."""
    feat = cfg.c0 * cfg.h0 * cfg.w0
    shapes = {
        "mlp.fc1.W": (cfg.mlp_hidden, 4 * cfg.pe.L),
        "mlp.fc1.b": (cfg.mlp_hidden,),
        "mlp.fc2.W": (feat, cfg.mlp_hidden),
        "mlp.fc2.b": (feat,),
    }
    c_in = cfg.c0
    for i, blk in enumerate(cfg.blocks):
        c, s2 = blk.channels, blk.factor ** 2
        shapes[f"block{i}.nerv.conv.K"] = (c * s2, c_in, 3, 3)
        shapes[f"block{i}.nerv.conv.b"] = (c * s2,)
        for j in (1, 2):
            shapes[f"block{i}.res.conv{j}.K"] = (c, c, 3, 3)
            shapes[f"block{i}.res.conv{j}.b"] = (c,)
        c_in = c
    shapes["head.conv.K"] = (3, c_in, 3, 3)
    shapes["head.conv.b"] = (3,)
    return shapes


def parameter_count(cfg: ModelConfig) -> int:
    """Closed form of the module docstring; independent of :func:`parameter_shapes`."""
    p, hid, feat = 4 * cfg.pe.L, cfg.mlp_hidden, cfg.c0 * cfg.h0 * cfg.w0
    total = p * hid + hid + hid * feat + feat
    c_prev = cfg.c0
    for blk in cfg.blocks:
        c, s2 = blk.channels, blk.factor ** 2
        total += 9 * c_prev * c * s2 + c * s2 + 2 * (9 * c * c + c)
        c_prev = c
    return total + 27 * c_prev + 3


def is_prunable(name: str) -> bool:
    """Weight matrices and conv kernels are pruned; biases and the head are not."""
    return name.endswith((".W", ".K")) and not name.startswith("head.")


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, Tensor] = field(default_factory=dict)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def with_state(self, state: dict[str, np.ndarray]) -> "Model":
        params = {}
        for name, shape in parameter_shapes(self.config).items():
            arr = np.asarray(state[name], dtype=self.params[name].dtype)
            if arr.shape != shape:
                raise ConfigError(f"{name}: shape {arr.shape} != {shape}")
            params[name] = Tensor(arr.copy(), requires_grad=True)
        return Model(self.config, params)


def build_model(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> Model:
    """Fan-in scaled uniform init for weights/kernels, zero biases."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        if name.endswith(".b"):
            arr = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = math.sqrt(1.0 / fan_in)
            arr = rng.uniform(-bound, bound, size=shape).astype(dtype)
        params[name] = Tensor(arr, requires_grad=True)
    return Model(cfg, params)


def _residual(x: Tensor, p: dict, prefix: str, post_act: bool) -> Tensor:
    h = ad.silu(ad.conv2d(x, p[prefix + "conv1.K"], p[prefix + "conv1.b"]))
    h = ad.conv2d(h, p[prefix + "conv2.K"], p[prefix + "conv2.b"])
    out = ad.add(h, x)
    return ad.silu(out) if post_act else out


def forward(model: Model, coord, experimental: bool = False) -> Tensor:
    """Render the SAI at ``coord`` as a ``(3, crop_H, crop_W)`` tensor."""
    cfg, p = model.config, model.params
    u, v = coord
    in_grid = float(u).is_integer() and float(v).is_integer() \
        and 0 <= u < cfg.U and 0 <= v < cfg.V
    if not in_grid:
        if not experimental:
            raise ValueError(f"coordinate ({u},{v}) outside the {cfg.U}x{cfg.V} grid")
        warnings.warn(f"experimental off-grid coordinate ({u},{v}); no quality guarantee",
                      stacklevel=2)
    dtype = p["mlp.fc1.W"].dtype
    x = Tensor(positional_encoding((u, v), cfg.U, cfg.V, cfg.pe, dtype=dtype))
    x = ad.silu(ad.linear(x, p["mlp.fc1.W"], p["mlp.fc1.b"]))
    x = ad.silu(ad.linear(x, p["mlp.fc2.W"], p["mlp.fc2.b"]))
    x = ad.reshape(x, (cfg.c0, cfg.h0, cfg.w0))
    for i, blk in enumerate(cfg.blocks):
        x = ad.conv2d(x, p[f"block{i}.nerv.conv.K"], p[f"block{i}.nerv.conv.b"])
        x = ad.silu(ad.pixel_shuffle(x, blk.factor))
        x = _residual(x, p, f"block{i}.res.", cfg.residual_post_activation)
    x = ad.conv2d(x, p["head.conv.K"], p["head.conv.b"])
    x = ad.sigmoid(x) if cfg.output_activation == "sigmoid" else ad.clamp01(x)
    top = (cfg.out_H - cfg.crop_H) // 2
    left = (cfg.out_W - cfg.crop_W) // 2
    if (cfg.crop_H, cfg.crop_W) != (cfg.out_H, cfg.out_W):
        x = ad.crop2d(x, top, left, cfg.crop_H, cfg.crop_W)
    return x


def decode_view(model: Model, coord, experimental: bool = False) -> np.ndarray:
    """Single-view inference; returns an ``(H, W, 3)`` image without touching other views."""
    return forward(model, coord, experimental=experimental).data.transpose(1, 2, 0)


def decode_all(model: Model) -> np.ndarray:
    cfg = model.config
    out = np.empty((cfg.U, cfg.V, cfg.crop_H, cfg.crop_W, 3), dtype=np.float32)
    for u in range(cfg.U):
        for v in range(cfg.V):
            out[u, v] = decode_view(model, AngularCoord(u, v))
    return out
