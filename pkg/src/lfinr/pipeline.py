"""End-to-end encode/decode pipeline shared by the CLI and the RD sweep."""
from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .codec import BACKEND, apply_masks, deserialize, prune_global, serialize
from .lightfield import LightField
from .metrics import QualityReport, evaluate
from .model import Model, ModelConfig, build_model, config_for_field, decode_all, parameter_count
from .train import TrainConfig, TrainLog, finetune_masked, train

PRESETS = ("tiny", "small", "medium", "full")


class StageError(RuntimeError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.original = exc


def load_preset(name_or_path: str) -> dict:
    """Named preset shipped with the package, or a JSON file with the same schema."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return json.loads(path.read_text())
    if name_or_path not in PRESETS:
        raise ValueError(f"unknown preset {name_or_path!r} (choose from {', '.join(PRESETS)})")
    text = resources.files("lfinr.presets").joinpath(f"{name_or_path}.json").read_text()
    return json.loads(text)


def model_config_for(preset: dict, lf: LightField) -> ModelConfig:
    m = dict(preset["model"])
    return config_for_field(lf.U, lf.V, lf.H, lf.W, m.pop("factors"), **m)


def train_config_for(preset: dict, seed: int, **overrides) -> TrainConfig:
    params = {**preset.get("train", {}), "seed": seed}
    params.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**params)


@dataclass
class EncodeResult:
    stream: bytes
    model_config: ModelConfig
    train_config: TrainConfig
    prune_ratio: float
    quant_bits: int
    uncompressed: QualityReport
    compressed: QualityReport
    train_log: TrainLog
    finetune_log: TrainLog | None
    num_parameters: int
    timings: dict = field(default_factory=dict)
    reconstruction: np.ndarray | None = None

    @property
    def bpp(self) -> float:
        return self.compressed.bpp

    def manifest(self, seed: int, preset: str, input_path=None, outputs=None) -> dict:
        return {
            "tool": "lfinr",
            "versions": versions(),
            "preset": preset,
            "seed": seed,
            "input": None if input_path is None else str(input_path),
            "outputs": outputs or {},
            "model_config": self.model_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "compress": {"prune_ratio": self.prune_ratio, "quant_bits": self.quant_bits},
            "num_parameters": self.num_parameters,
            "stream_bytes": len(self.stream),
            "metrics": {
                "uncompressed": self.uncompressed.summary(),
                "compressed": self.compressed.summary(),
            },
        }


def versions() -> dict:
    return {
        "lfinr": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "entropy_backend": BACKEND,
    }


def _stage(name: str, timings: dict, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = time.perf_counter() - t0


def encode_lightfield(lf: LightField, preset: dict, seed: int = 0, *, epochs: int | None = None,
                      finetune_epochs: int | None = None, prune_ratio: float | None = None,
                      quant_bits: int | None = None, alpha: float | None = None,
                      progress=None) -> EncodeResult:
    """build -> train -> prune -> masked fine-tune -> quantize + entropy code.

    Both quality reports are measured on the input: ``uncompressed`` right
    after training, ``compressed`` on the model decoded back from the
    emitted bytes.
    """
    timings: dict[str, float] = {}
    compress = preset.get("compress", {})
    ratio = compress.get("prune_ratio", 0.8) if prune_ratio is None else prune_ratio
    bits = compress.get("quant_bits", 8) if quant_bits is None else quant_bits

    cfg = _stage("config", timings, model_config_for, preset, lf)
    tcfg = _stage("config", timings, train_config_for, preset, seed, epochs=epochs,
                  finetune_epochs=finetune_epochs, alpha=alpha)
    model = _stage("build", timings, build_model, cfg, seed)
    _, log = _stage("train", timings, train, model, lf, tcfg, progress)
    uncompressed = _stage("evaluate", timings, evaluate, lf, LightField(decode_all(model)))

    masks: dict[str, np.ndarray] = {}
    ft_log = None
    if ratio > 0:
        masks = _stage("prune", timings, prune_global, model, ratio)
        apply_masks(model, masks)
        if tcfg.finetune_epochs > 0:
            _, ft_log = _stage("finetune", timings, finetune_masked, model, lf, masks, tcfg, progress)
    stream = _stage("serialize", timings, serialize, model, masks, bits)

    decoded, _, _ = _stage("verify", timings, deserialize, stream)
    recon = decode_all(decoded)
    compressed = _stage("evaluate_compressed", timings, evaluate, lf, LightField(recon), len(stream))
    return EncodeResult(stream, cfg, tcfg, ratio, bits, uncompressed, compressed, log, ft_log,
                        parameter_count(cfg), timings, recon)


def decode_stream(data: bytes) -> tuple[Model, LightField]:
    model, _, _ = deserialize(data)
    return model, LightField(decode_all(model))


RD_HEADER = ("preset", "bpp", "yuv_psnr", "y_ssim",
             "psnr_drop_from_compression", "ssim_drop_from_compression")


def rd_row(name: str, res: EncodeResult) -> dict:
    """One RD-table row; drops are compressed minus uncompressed (negative = loss)."""
    return {
        "preset": name,
        "bpp": res.bpp,
        "yuv_psnr": res.compressed.mean_yuv_psnr,
        "y_ssim": res.compressed.mean_y_ssim,
        "psnr_drop_from_compression": res.compressed.mean_yuv_psnr - res.uncompressed.mean_yuv_psnr,
        "ssim_drop_from_compression": res.compressed.mean_y_ssim - res.uncompressed.mean_y_ssim,
    }
